//! Posterior of linear combinations without sampling: the two-component
//! worked example, then nested sums of linear predictors of a fitted model.

use latent_sgc::inla::fit;
use latent_sgc::lincomb::{lincomb_from_fit, marginals_1d, transform_jmarginal, JointSgcSummary, LinCombMatrix};
use latent_sgc::model::{simulate_glmm, Family, GlmmModel};
use nalgebra::{dmatrix, DMatrix, DVector};

fn main() -> latent_sgc::Result<()> {
    let s = JointSgcSummary::new(
        vec!["x1".into(), "x2".into()],
        DVector::from_vec(vec![1.0, 2.0]),
        dmatrix![2.0, 1.0; 1.0, 5.0],
        DVector::from_vec(vec![-0.4, 0.6]),
    )?;
    let a = LinCombMatrix::new(vec!["x1+x2".into(), "x1-x2".into()], dmatrix![1.0, 1.0; 1.0, -1.0])?;
    let out = transform_jmarginal(&s, &a)?;
    for (m, h) in marginals_1d(&out)?.iter().zip(0..) {
        let p = m.params;
        println!("{}: mean {} var {} skew {:.4} -> SN({:.3}, {:.3}, {:.3})", m.name, out.mean[h], out.cov[h][h], out.skewness[h], p.xi, p.omega, p.alpha);
    }

    let sim = simulate_glmm(Family::Poisson, 50, 10, 1.5, 0.5, 1)?;
    let f = fit(&GlmmModel::new(sim.spec)?)?;
    let a = DMatrix::from_fn(4, f.latent_dim(), |r, c| if (8..=9 + r).contains(&c) { 1.0 } else { 0.0 });
    let names = (0..4).map(|r| format!("eta[9]+..+eta[{}]", 10 + r)).collect();
    let (_, marginals) = lincomb_from_fit(&f, &LinCombMatrix::new(names, a)?)?;
    println!();
    for m in &marginals {
        let r = m.summary()?;
        println!("{:<18} mean {:>8.4} sd {:.4} 95% [{:.4}, {:.4}] skew {:+.3}", r.name, r.mean, r.sd, r.q025, r.q975, r.skewness);
    }
    Ok(())
}
