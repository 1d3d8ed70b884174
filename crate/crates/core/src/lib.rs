//! Frequency-band instrumental seismic intensity.
//!
//! Accelerograms are run through a 5 %-damped single-degree-of-freedom
//! oscillator at each frequency of interest; the integral of the squared
//! absolute response acceleration (the destructiveness integral, EIS) is
//! mapped to an intensity calibrated to the EMS-98 scale, either pointwise
//! or averaged over one of twelve half-octave bands between 0.25 and 16 Hz.
//! Station values can then be gridded and contoured per band.
//!
//! - [`spectral`]: oscillator response and EIS spectra
//! - [`intensity`]: pointwise and band intensities, band table, station max
//! - [`ingestion`]: record, station and event files
//! - [`mapping`]: IDW grids, marching-squares contours, GeoJSON and CSV
//! - [`cli`]: the `instint` command line

pub mod cli;
pub mod error;
pub mod ingestion;
pub mod intensity;
pub mod mapping;
pub mod spectral;

pub use error::{IngestError, IntensityError, MappingError, ValidationError};
pub use ingestion::{EventDataset, EventMeta, StationMeta, Units};
pub use intensity::{
    band_averaged_intensity, band_table, pointwise_intensity, station_band_intensity,
    BandDefinition, BandIntensityResult, IntensityModel,
};
pub use mapping::{ContourSet, GridSpec, IntensityGrid, IntensityObservation};
pub use spectral::{
    destructiveness_integral, eis_spectrum, sdof_absolute_acceleration, Accelerogram, Component,
    EisSpectrum, SdofConfig,
};
