use alloc::string::String;

/// Errors raised by the kernels and mesh generators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Argument outside the domain of the stored-energy function (loss of orientation).
    #[error("domain error: {0}")]
    Domain(String),
    /// Non-positive Jacobian of the deformation at a quadrature point of an element.
    #[error("orientation lost in element {element}: det = {det:e}")]
    Orientation { element: usize, det: f64 },
    /// Degenerate or inconsistent geometry.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Meshing constants admit no feasible layer.
    #[error("meshing strategy error: {0}")]
    Strategy(String),
    /// Invalid configuration or boundary data.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type CoreResult<T> = Result<T, CoreError>;
