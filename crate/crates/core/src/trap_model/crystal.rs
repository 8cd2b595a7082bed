use nalgebra::{DMatrix, DVector};

use super::species::IonSpecies;
use crate::constants::coulomb_constant;
use crate::{Error, Result};

/// Largest chain handled; longer strings buckle into zig-zag configurations.
pub const MAX_LINEAR_IONS: usize = 30;

/// Length scale l = (Q^2 / (4 pi eps0 m omega^2))^(1/3).
pub fn crystal_length_scale(omega_z: f64, species: &IonSpecies) -> f64 {
    (coulomb_constant() * species.charge * species.charge / (species.mass * omega_z * omega_z))
        .cbrt()
}

fn energy(u: &[f64]) -> f64 {
    let mut e = 0.5 * u.iter().map(|x| x * x).sum::<f64>();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            e += 1.0 / (u[j] - u[i]).abs();
        }
    }
    e
}

fn gradient_and_hessian(u: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = u.len();
    let mut g = DVector::from_iterator(n, u.iter().cloned());
    let mut h = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = u[i] - u[j];
            g[i] -= d.signum() / (d * d);
            let c = 2.0 / d.abs().powi(3);
            h[(i, i)] += c;
            h[(i, j)] -= c;
        }
    }
    (g, h)
}

/// Equilibrium positions (m, ascending, centred on 0) of `n` ions in a
/// harmonic axial well with Coulomb repulsion.
pub fn ion_crystal_positions(omega_z: f64, species: &IonSpecies, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one ion"));
    }
    if n > MAX_LINEAR_IONS {
        return Err(Error::Unsupported(format!(
            "{n} ions exceeds the linear-chain limit of {MAX_LINEAR_IONS}"
        )));
    }
    if !(omega_z > 0.0 && omega_z.is_finite()) {
        return Err(Error::invalid("omega_z must be positive"));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let mid = (n as f64 - 1.0) / 2.0;
    let spacing = 2.0 * (n as f64).powf(-0.56);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - mid) * spacing).collect();

    for _ in 0..100 {
        let (g, h) = gradient_and_hessian(&u);
        if g.amax() < 1e-14 {
            break;
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Estimation("crystal Hessian not positive definite".into()))?
            .solve(&g);
        let e0 = energy(&u);
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - alpha * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered && energy(&trial) <= e0 {
                u = trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(Error::Estimation("crystal minimisation stalled".into()));
            }
        }
    }
    let mean = u.iter().sum::<f64>() / n as f64;
    let scale = crystal_length_scale(omega_z, species);
    Ok(u.iter().map(|x| (x - mean) * scale).collect())
}
