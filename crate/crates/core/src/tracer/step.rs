use super::TraceError;
use crate::field::{closest_frame_vector, FrameSource};
use crate::Vec3;

/// Project `d` into the tangent plane at `x`. The plane normal is the frame
/// vector at `x` best aligned with `n_ref`.
pub fn parallel_transport<F: FrameSource + ?Sized>(
    field: &F,
    x: &Vec3,
    d: &Vec3,
    n_ref: &Vec3,
) -> Result<Vec3, TraceError> {
    let frame = field.frame_at(x)?;
    let (_, n) = closest_frame_vector(&frame, n_ref);
    let t = d - n * n.dot(d);
    let len = t.norm();
    if len < 1e-12 {
        return Err(TraceError::DegenerateProjection);
    }
    Ok(t / len)
}

/// One fourth-order Runge-Kutta step of length `delta` from `p0`.
///
/// Every stage transports the initial direction `d0` into the tangent plane at
/// its evaluation point, using `n0` to pick the plane normal:
///
/// ```text
/// k1 = delta * P(p0)
/// k2 = delta * P(p0 + k1 / 2)
/// k3 = delta * P(p0 + k2 / 2)
/// k4 = delta * P(p0 + k3)
/// pn = p0 + (k1 + 2 k2 + 2 k3 + k4) / 6
/// ```
pub fn rk4_step<F: FrameSource + ?Sized>(
    field: &F,
    p0: &Vec3,
    n0: &Vec3,
    d0: &Vec3,
    delta: f64,
) -> Result<Vec3, TraceError> {
    let transport = |x: &Vec3| parallel_transport(field, x, d0, n0).map(|v| v * delta);
    let k1 = transport(p0)?;
    let k2 = transport(&(p0 + k1 * 0.5))?;
    let k3 = transport(&(p0 + k2 * 0.5))?;
    let k4 = transport(&(p0 + k3))?;
    Ok(p0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0)
}
