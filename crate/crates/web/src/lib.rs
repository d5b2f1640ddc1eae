//! Browser bindings. Every entry point takes a scenario in the same text
//! format the `susy-forge` CLI reads and returns sampled curves.

use wasm_bindgen::prelude::*;

use susy_forge::crum::{build_intertwiner, partner_potential, singular_levels, Side};
use susy_forge::cubic::{check_lower_bound, g_profile};
use susy_forge::gridfn::GridFunction;
use susy_forge::susy::classify2;
use susy_forge::cli::{Overrides, Scenario};

fn re(f: &GridFunction) -> Vec<f64> {
    f.values().iter().map(|v| v.re).collect()
}

fn load(text: &str) -> Result<(Scenario, susy_forge::diffop::Hamiltonian, susy_forge::crum::JordanBasis), String> {
    let sc = Scenario::parse(text).map_err(|e| e.to_string())?;
    let h = sc.hamiltonian(&Overrides::default()).map_err(|e| e.to_string())?;
    let basis = sc.basis(&h).map_err(|e| e.to_string())?;
    Ok((sc, h, basis))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct PartnerView {
    x: Vec<f64>,
    v1: Vec<f64>,
    v2: Vec<f64>,
    singular: Vec<usize>,
}

#[wasm_bindgen]
impl PartnerView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn v1(&self) -> Vec<f64> {
        self.v1.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn v2(&self) -> Vec<f64> {
        self.v2.clone()
    }

    /// Levels `j >= 2` whose partial Wronskian has a zero.
    #[wasm_bindgen(getter)]
    pub fn singular_levels(&self) -> Vec<usize> {
        self.singular.clone()
    }
}

pub fn compute_partner(text: &str) -> Result<PartnerView, String> {
    let (_, h, basis) = load(text)?;
    let v2 = partner_potential(h.potential(), &basis).map_err(|e| e.to_string())?;
    let singular = singular_levels(&basis).map_err(|e| e.to_string())?;
    Ok(PartnerView { x: h.grid().xs(), v1: re(h.potential()), v2: re(&v2), singular })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ProfileView {
    x: Vec<f64>,
    g: Vec<f64>,
    discriminant: Vec<f64>,
    sqrt_branch: Vec<f64>,
    case: u8,
    lambda3: f64,
    min_gap: f64,
    bound_ok: bool,
}

#[wasm_bindgen]
impl ProfileView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn g(&self) -> Vec<f64> {
        self.g.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn discriminant(&self) -> Vec<f64> {
        self.discriminant.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sqrt_branch(&self) -> Vec<f64> {
        self.sqrt_branch.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn case(&self) -> u8 {
        self.case
    }

    #[wasm_bindgen(getter)]
    pub fn lambda3(&self) -> f64 {
        self.lambda3
    }

    /// `min (G - lambda_3)` over the window.
    #[wasm_bindgen(getter)]
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    #[wasm_bindgen(getter)]
    pub fn bound_ok(&self) -> bool {
        self.bound_ok
    }
}

pub fn compute_profile(text: &str) -> Result<ProfileView, String> {
    let (_, h, basis) = load(text)?;
    if basis.dim() != 3 {
        return Err(format!("the G profile needs three transformation functions, got {}", basis.dim()));
    }
    let gp = g_profile(&basis).map_err(|e| e.to_string())?;
    let (lambda3, min_gap, bound_ok) = match check_lower_bound(&gp) {
        Ok(b) => (b.lambda3, b.min_gap, b.ok),
        Err(_) => (f64::NAN, f64::NAN, false),
    };
    Ok(ProfileView {
        x: h.grid().xs(),
        g: re(&gp.g),
        discriminant: re(&gp.discriminant),
        sqrt_branch: re(&gp.sqrt_branch),
        case: gp.case.number(),
        lambda3,
        min_gap,
        bound_ok,
    })
}

pub fn compute_class(text: &str) -> Result<String, String> {
    let (_, _, basis) = load(text)?;
    if basis.dim() != 2 {
        return Err(format!("classification needs two transformation functions, got {}", basis.dim()));
    }
    let q = build_intertwiner(&basis, Side::Minus).map_err(|e| e.to_string())?;
    classify2(&q, &basis).map(|c| c.to_string()).map_err(|e| e.to_string())
}

/// Partner potential `V2` of the scenario.
#[wasm_bindgen]
pub fn partner(text: &str) -> Result<PartnerView, JsError> {
    compute_partner(text).map_err(|e| JsError::new(&e))
}

/// G, its discriminant and square-root branch for an order-3 scenario.
#[wasm_bindgen]
pub fn profile(text: &str) -> Result<ProfileView, JsError> {
    compute_profile(text).map_err(|e| JsError::new(&e))
}

/// Verdict for an order-2 scenario.
#[wasm_bindgen]
pub fn classify(text: &str) -> Result<String, JsError> {
    compute_class(text).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLITON: &str = "grid_n = 513\n[chain]\nlambda = -1\nfunction = cosh:1\n";

    #[test]
    fn one_soliton_partner() {
        let view = compute_partner(SOLITON).unwrap();
        assert_eq!(view.x.len(), 513);
        let mid = view.x.len() / 2;
        assert!((view.v2[mid] + 2.0).abs() < 1e-8, "{}", view.v2[mid]);
        assert!(view.v1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_profile_is_constant() {
        let text = "grid_n = 513\n[chain]\nlambda = -1\nfunction = exp:1\n[chain]\nlambda = -4\nfunction = exp:2\n[chain]\nlambda = -9\nfunction = exp:3\n";
        let view = compute_profile(text).unwrap();
        assert_eq!(view.case, 1);
        assert!(view.g[100..400].iter().all(|g| (g - 11.0).abs() < 1e-6));
        assert!(view.bound_ok && (view.min_gap - 20.0).abs() < 1e-6);
        assert!(compute_profile(SOLITON).is_err());
    }

    #[test]
    fn complex_pair_is_type_one() {
        let text = "grid_n = 513\n[chain]\nlambda = 0,-2\nfunction = exp:1,1\n[chain]\nlambda = 0,2\nfunction = exp:1,-1\n";
        assert_eq!(compute_class(text).unwrap(), "type I");
    }
}
