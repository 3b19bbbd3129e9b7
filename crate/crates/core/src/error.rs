use nalgebra::Vector3;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} is not above the electrode plane (y must be > 0)")]
    BelowPlane([f64; 3]),

    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("null search did not converge after {iterations} iterations (|E| = {field_norm:.3e} V/m)")]
    NullNotConverged {
        iterations: usize,
        last: Vector3<f64>,
        field_norm: f64,
    },

    #[error("voltage targets infeasible within bounds (best relative residual {residual:.3e})")]
    Infeasible { residual: f64, voltages: Vec<f64> },

    #[error("voltage {value} V on `{electrode}` exceeds bound {bound} V")]
    VoltageOutOfBounds {
        electrode: String,
        value: f64,
        bound: f64,
    },

    #[error("no local minimum of the rf field found between {lo:.3e} m and {hi:.3e} m")]
    NoRfNull { lo: f64, hi: f64 },

    #[error("axial frequency {omega_z:.6e} rad/s exceeds stability limit {limit:.6e} rad/s")]
    Unstable { omega_z: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration diverged at t = {time:.6e} s: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("transport solve failed at knot {knot}: {source}")]
    TransportKnot {
        knot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sideband ratio {0} >= 1: distribution is not thermal")]
    RatioNotThermal(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("spectral integral did not converge: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
