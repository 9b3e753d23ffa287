use crate::num::Real;
use crate::vec3::Vec3;

/// One classical fourth-order Runge–Kutta step for `y' = f(t, y)`.
pub fn rk4_step<T: Real, const N: usize>(
    t: T,
    y: &[T; N],
    dt: T,
    f: impl Fn(T, &[T; N]) -> [T; N],
) -> [T; N] {
    let half = dt * T::lit(0.5);
    let axpy = |a: &[T; N], s: T, b: &[T; N]| -> [T; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] = a[i] + s * b[i];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + dt, &axpy(y, dt, &k3));
    let sixth = dt / T::lit(6.0);
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

pub(crate) fn pack3<T: Real>(vs: [Vec3<T>; 3]) -> [T; 9] {
    let [a, b, c] = vs;
    [a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z]
}

pub(crate) fn unpack3<T: Real>(y: &[T; 9]) -> [Vec3<T>; 3] {
    [
        Vec3::new(y[0], y[1], y[2]),
        Vec3::new(y[3], y[4], y[5]),
        Vec3::new(y[6], y[7], y[8]),
    ]
}

/// Number of steps of at most `dt` covering `[0, t_end]`, and the step used.
pub(crate) fn step_plan<T: Real>(t_end: T, dt: T) -> (usize, T) {
    if t_end <= T::zero() {
        return (0, dt);
    }
    let n = (t_end / dt).ceil().to_usize().unwrap_or(1).max(1);
    (n, t_end / T::of_usize(n))
}

/// Least-squares angular frequency of a vector rotating about ẑ, from the
/// unwrapped azimuth of its x–y projection. Positive is counter-clockwise.
pub fn fit_precession_frequency<T: Real>(times: &[T], axes: &[Vec3<T>]) -> T {
    assert_eq!(times.len(), axes.len());
    let two_pi = T::lit(2.0) * T::PI();
    let mut phases = Vec::with_capacity(axes.len());
    let mut prev = T::zero();
    let mut offset = T::zero();
    for (i, a) in axes.iter().enumerate() {
        let raw = a.y.atan2(a.x);
        if i > 0 {
            let mut d = raw + offset - prev;
            while d > T::PI() {
                offset = offset - two_pi;
                d = d - two_pi;
            }
            while d < -T::PI() {
                offset = offset + two_pi;
                d = d + two_pi;
            }
        }
        prev = raw + offset;
        phases.push(prev);
    }
    let n = T::of_usize(times.len());
    let mt = times.iter().fold(T::zero(), |s, &t| s + t) / n;
    let mp = phases.iter().fold(T::zero(), |s, &p| s + p) / n;
    let (mut num, mut den) = (T::zero(), T::zero());
    for (&t, &p) in times.iter().zip(&phases) {
        num = num + (t - mt) * (p - mp);
        den = den + (t - mt) * (t - mt);
    }
    num / den
}
