//! Factorizes a small precision matrix, draws from the Gaussian field with
//! and without a sum-to-zero constraint, and checks the sample covariance.

use latent_sgc::precision::{covariance_from_precision, sample_constrained_gmrf, sample_gmrf, LinearConstraint, PrecisionMatrix};
use nalgebra::{dmatrix, DMatrix, DVector};

fn main() -> latent_sgc::Result<()> {
    // first-order random walk on four nodes plus a small ridge
    let q = PrecisionMatrix::new(dmatrix![
        1.1, -1.0, 0.0, 0.0;
        -1.0, 2.1, -1.0, 0.0;
        0.0, -1.0, 2.1, -1.0;
        0.0, 0.0, -1.0, 1.1
    ])?;
    let f = q.factorize()?;
    println!("log det Q = {:.6}", f.log_det());

    let mean = DVector::zeros(4);
    let draws = sample_gmrf(&mean, &q, 200_000, 1)?;
    let emp = draws.transpose() * &draws / draws.nrows() as f64;
    println!("exact covariance:{:.3}", covariance_from_precision(&q)?);
    println!("sample covariance:{emp:.3}");

    let sum_zero = LinearConstraint::new(DMatrix::from_element(1, 4, 1.0), DVector::zeros(1))?;
    let constrained = sample_constrained_gmrf(&mean, &q, &sum_zero, 5, 2)?;
    for row in constrained.row_iter() {
        println!("{:>8.4} {:>8.4} {:>8.4} {:>8.4}   sum {:+.1e}", row[0], row[1], row[2], row[3], row.sum());
    }
    Ok(())
}
