//! Adaptive Dormand-Prince 5(4) integration of real ODE systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T: Real> {
    pub rtol: T,
    pub atol: T,
    /// First trial step; the controller adapts it afterwards.
    pub initial_step: T,
    pub max_steps: usize,
}

impl<T: Real> OdeOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { rtol: tol, atol: tol, initial_step: T::lit(1e-2), max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 - -92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dt = f(t, y)` from `t0`, recording `y` at each time of
/// `t_out` (monotone, in the direction of integration). Steps are clipped to
/// land exactly on output times.
pub fn integrate<T: Real, F>(
    mut f: F,
    t0: T,
    y0: &[T],
    t_out: &[T],
    opts: &OdeOptions<T>,
) -> Result<(Vec<Vec<T>>, OdeStats)>
where
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(t_out.len());
    if t_out.is_empty() {
        return Ok((out, stats));
    }
    let t_end = t_out[t_out.len() - 1];
    let dir = if t_end >= t0 { T::one() } else { -T::one() };
    if t_out.windows(2).any(|w| (w[1] - w[0]) * dir < T::zero()) || (t_out[0] - t0) * dir < T::zero() {
        return Err(Error::InvalidArgument("output times must be monotone in the integration direction".into()));
    }
    let l = |x: f64| T::lit(x);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut tmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    f(t, &y, &mut k[0]);
    let mut h = opts.initial_step.abs().min((t_end - t0).abs().max(T::min_positive_value()));
    let safety = l(0.9);
    let mut next_out = 0;
    while next_out < t_out.len() {
        let target = t_out[next_out];
        if (target - t) * dir <= T::zero() {
            out.push(y.clone());
            next_out += 1;
            continue;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integrator(format!("step budget of {} exhausted", opts.max_steps)));
        }
        let remaining = (target - t).abs();
        let mut clipped = false;
        let mut hs = h;
        if hs >= remaining {
            hs = remaining;
            clipped = true;
        }
        let hh = hs * dir;
        if hs <= (t.abs().max(T::one())) * T::epsilon() * l(4.0) {
            return Err(Error::Integrator(format!("step size underflow at t = {}", t.to_f64_lossy())));
        }
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($a:expr, $ki:expr)),*]) => {{
                for i in 0..n {
                    tmp[i] = y[i] + hh * (T::zero() $(+ l($a) * k[$ki][i])*);
                }
                let (_, rest) = k.split_at_mut($dst);
                f(t + hh * l($c), &tmp, &mut rest[0]);
            }};
        }
        stage!(1, C2, [(A21, 0)]);
        stage!(2, C3, [(A31, 0), (A32, 1)]);
        stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
        stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
        stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
        for i in 0..n {
            ynew[i] = y[i] + hh * (l(B1) * k[0][i] + l(B3) * k[2][i] + l(B4) * k[3][i] + l(B5) * k[4][i] + l(B6) * k[5][i]);
        }
        {
            let (_, rest) = k.split_at_mut(6);
            f(t + hh, &ynew, &mut rest[0]);
        }
        let mut err = T::zero();
        for i in 0..n {
            let e = hh
                * (l(E1) * k[0][i] + l(E3) * k[2][i] + l(E4) * k[3][i] + l(E5) * k[4][i] + l(E6) * k[5][i] + l(E7) * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / T::of_usize(n.max(1))).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = hs * l(0.2);
            continue;
        }
        if err <= T::one() {
            stats.accepted += 1;
            t = if clipped { target } else { t + hh };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            let fac = if err == T::zero() { l(5.0) } else { (safety * err.powf(l(-0.2))).min(l(5.0)).max(l(0.2)) };
            // a clipped step says nothing about the natural step size
            h = if clipped { h.max(hs * fac) } else { hs * fac };
        } else {
            stats.rejected += 1;
            h = hs * (safety * err.powf(l(-0.2))).max(l(0.1));
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let (ys, stats) = integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &[1.0, 10.0, 50.0],
            &OdeOptions::new(1e-12),
        )
        .unwrap();
        for (y, t) in ys.iter().zip([1.0f64, 10.0, 50.0]) {
            assert!((y[0] - t.cos()).abs() < 1e-9 && (y[1] + t.sin()).abs() < 1e-9);
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn backward_integration() {
        let (ys, _) = integrate(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0], 0.0, &[1.0], &[-2.0], &OdeOptions::new(1e-12)).unwrap();
        assert!((ys[0][0] - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn output_at_start_time() {
        let (ys, _) = integrate(|_, _: &[f64], dy: &mut [f64]| dy[0] = 1.0, 3.0, &[0.5], &[3.0, 4.0], &OdeOptions::new(1e-10)).unwrap();
        assert_eq!(ys[0][0], 0.5);
        assert!((ys[1][0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_output_is_rejected() {
        let r = integrate(|_, _: &[f64], dy: &mut [f64]| dy[0] = 1.0, 0.0, &[0.0], &[1.0, 0.5], &OdeOptions::new(1e-10));
        assert!(r.is_err());
    }
}
