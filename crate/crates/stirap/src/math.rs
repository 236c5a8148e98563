//! Small shared numeric helpers.

/// Hyperbolic secant. Underflows cleanly to 0 for |x| large enough that
/// cosh overflows.
pub(crate) fn sech(x: f64) -> f64 {
    x.cosh().recip()
}

/// Wrap an angle into (-pi, pi].
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(std::f64::consts::TAU);
    if y > std::f64::consts::PI {
        y -= std::f64::consts::TAU;
    }
    y
}
