//! A three-dimensional skew Gaussian copula: the forward map, its inverse,
//! the Jacobian and the density gap against the Gaussian approximation.

use latent_sgc::precision::PrecisionMatrix;
use latent_sgc::sgc::{CorrectionKind, FullConditionalSgc};
use nalgebra::{dmatrix, DVector};

fn main() -> latent_sgc::Result<()> {
    let q = PrecisionMatrix::new(dmatrix![2.0, 0.5, 0.0; 0.5, 1.5, -0.3; 0.0, -0.3, 1.0])?;
    let mu = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let mu_tilde = DVector::from_vec(vec![0.6, -1.2, 2.1]);
    let sgc = FullConditionalSgc::from_parts(mu.clone(), &q, mu_tilde, DVector::from_vec(vec![-0.5, 0.2, 0.7]))?;

    let x = [1.5, -2.0, 3.5];
    let xt = sgc.forward_transform(&x)?;
    let back = sgc.inverse_transform(&xt)?;
    println!("x       = {x:?}");
    println!("h(x)    = {xt:.5?}");
    println!("h⁻¹h(x) = {back:.5?}");
    println!("δ       = {:.5?}", sgc.jacobian_terms(&xt)?);
    println!("log density: copula {:.5}, gaussian {:.5}", sgc.log_density(&xt)?, sgc.log_density_gaussian(&x)?);
    println!("density gap at μ: {:.6}", sgc.correction_delta()?);

    for kind in [CorrectionKind::None, CorrectionKind::Mean, CorrectionKind::Skew] {
        let d = sgc.sample_full_conditional(kind, 100_000, 1)?;
        let means: Vec<f64> = (0..3).map(|i| d.column(i).mean()).collect();
        println!("{kind:>5}: sample means {means:.4?}");
    }
    Ok(())
}
