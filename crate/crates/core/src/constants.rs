//! Physical constants (CODATA 2018, SI units).

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Angular frequency (rad/s) of a vacuum wavelength (m).
#[inline]
pub fn omega_from_lambda(lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * C / lambda
}

/// Vacuum wavelength (m) of an angular frequency (rad/s).
#[inline]
pub fn lambda_from_omega(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * C / omega
}
