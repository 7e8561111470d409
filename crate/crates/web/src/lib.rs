//! Browser bindings: three small computations behind a static page.

use ckn_core::liouville::{eta_family, mass, LiouvilleParams};
use ckn_core::onofri::{onofri_gap, Bumps};
use ckn_core::operators::constants;
use ckn_core::QuadratureConfig;
use wasm_bindgen::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

/// `[x₀, η(x₀), x₁, η(x₁), …]` on `n` points of `[-half_width, half_width]`,
/// followed by `κ` and `2π(1-b)`.
pub fn liouville_samples(rho: f64, b: f64, half_width: f64, n: usize) -> Result<Vec<f64>, String> {
    let lp = LiouvilleParams::new(rho, b).map_err(|e| e.to_string())?;
    if !(half_width > 0.0) || n < 2 {
        return Err("need a positive half-width and at least two points".into());
    }
    let mut out = Vec::with_capacity(2 * n + 2);
    for i in 0..n {
        let x = -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64;
        out.extend([x, eta_family(&lp, x)]);
    }
    let m = mass(&lp, &cfg()).map_err(|e| e.to_string())?;
    out.extend([m.kappa, m.kappa_exact]);
    Ok(out)
}

/// `[lhs, quad_term, mean_term, gap, error_bar]` for one plateau bump.
pub fn bump_gap(center: f64, width: f64, height: f64, rho: f64, b: f64) -> Result<Vec<f64>, String> {
    if !(width > 0.0) {
        return Err("width must be positive".into());
    }
    let lp = LiouvilleParams::new(rho, b).map_err(|e| e.to_string())?;
    let v = Bumps::single(center, width, height);
    let r = onofri_gap(&v, &lp, &cfg().with_tol(1e-9, 1e-6)).map_err(|e| e.to_string())?;
    Ok(vec![r.lhs, r.quad_term, r.mean_term, r.gap, r.error_bar])
}

/// `[ς_γ, C_{γ,α}, c_H, c_CKN, quadrature error]`.
pub fn constants_row(gamma: f64, alpha: f64) -> Result<Vec<f64>, String> {
    let r = constants(1, gamma, alpha, &cfg()).map_err(|e| e.to_string())?;
    Ok(vec![r.sigma_gamma, r.c_gamma_alpha, r.c_hardy, r.c_ckn, r.quadrature_error])
}

#[wasm_bindgen]
pub fn liouville(rho: f64, b: f64, half_width: f64, n: usize) -> Result<Vec<f64>, JsError> {
    liouville_samples(rho, b, half_width, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gap(center: f64, width: f64, height: f64, rho: f64, b: f64) -> Result<Vec<f64>, JsError> {
    bump_gap(center, width, height, rho, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = ckn_constants)]
pub fn ckn_constants(gamma: f64, alpha: f64) -> Result<Vec<f64>, JsError> {
    constants_row(gamma, alpha).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn liouville_layout() {
        let v = liouville_samples(1.0, 0.0, 5.0, 11).unwrap();
        assert_eq!(v.len(), 24);
        assert_eq!(v[10], 0.0);
        assert!((v[11] - 2f64.ln()).abs() < 1e-14);
        assert!((v[22] - 2.0 * std::f64::consts::PI).abs() < 1e-8 && v[23] == 2.0 * std::f64::consts::PI);
        assert!(liouville_samples(1.0, 1.0, 5.0, 11).is_err());
    }

    #[test]
    fn zero_bump_has_zero_gap() {
        let r = bump_gap(0.0, 1.0, 0.0, 1.0, 0.3).unwrap();
        assert_eq!(r[3], 0.0);
        let r = bump_gap(0.5, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert!(r[3] >= -r[4]);
    }

    #[test]
    fn constants_match_the_core() {
        let r = constants_row(0.3, 0.1).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r[0] > 0.0 && r[1] < 0.0 && r[3] < r[2]);
        assert!(constants_row(0.6, 0.1).is_err());
    }
}
