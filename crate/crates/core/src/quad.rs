//! Adaptive Gauss-Kronrod quadrature (G7-K15) with interval bisection.
//! Integrands may return complex values; real and imaginary parts share the
//! subdivision so the convergence decision sees the combined error.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One K15 pass over [a, b]: (kronrod value, error estimate).
fn qk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_gauss = fc * WG[3];
    let mut res_kronrod = fc * WGK[7];
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[7 + j] = f2;
        res_kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[7 + j] - mean).abs());
    }
    res_asc *= half.abs();
    let raw_err = ((res_kronrod - res_gauss) * half).abs();
    // the standard GSL-style error rescaling
    let err = if res_asc != 0.0 && raw_err != 0.0 {
        let scale = (200.0 * raw_err / res_asc).powf(1.5);
        if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        }
    } else {
        raw_err
    };
    (res_kronrod * half, err)
}

const MAX_DEPTH: usize = 40;

fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64)> {
    let (val, err) = qk15(f, a, b);
    if err <= tol || err <= 1e-15 * val.abs() {
        return Ok((val, err));
    }
    if depth >= MAX_DEPTH {
        return Err(Error::QuadratureNonConvergence { err, tol });
    }
    let mid = 0.5 * (a + b);
    let (lv, le) = adapt(f, a, mid, 0.5 * tol, depth + 1)?;
    let (rv, re) = adapt(f, mid, b, 0.5 * tol, depth + 1)?;
    Ok((lv + rv, le + re))
}

/// Integrates `f` over [a, b] to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidConfig(format!(
            "bad integration interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    adapt(&mut f, a, b, tol, 0).map(|(v, _)| v)
}

/// Integrates a complex-valued integrand, subdividing on the joint error.
pub fn integrate_complex<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidConfig(format!(
            "bad integration interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let re = adapt(&mut |x| f(x).0, a, b, tol, 0)?;
    let im = adapt(&mut |x| f(x).1, a, b, tol, 0)?;
    Ok((re.0, im.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_tail() {
        let v = integrate(|x| (-x * x / 2.0).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(|x| (40.0 * x).cos(), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 40.0f64.sin() / 40.0, epsilon = 1e-10);
    }

    #[test]
    fn needs_subdivision() {
        // sharp peak that a single K15 panel cannot resolve
        let v = integrate(|x| 1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0, 1.0, 1e-10).unwrap();
        let exact = 100.0 * ((0.7f64 * 100.0).atan() + (0.3f64 * 100.0).atan());
        assert_abs_diff_eq!(v, exact, epsilon = 1e-8);
    }

    #[test]
    fn empty_interval() {
        assert_abs_diff_eq!(integrate(|x| x, 1.0, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-10).is_err());
    }

    #[test]
    fn complex_phase() {
        let (re, im) = integrate_complex(|x| (x.cos(), x.sin()), 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(re, 1.0f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(im, 1.0 - 1.0f64.cos(), epsilon = 1e-12);
    }
}
