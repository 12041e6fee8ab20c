//! Test-only reference kinematics, written independently of the library's chain code.
#![allow(dead_code)]

use cablesim_core::dynamics::ChainModel;
use nalgebra::{DVector, Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rot(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
}

/// (mass, com, rotation, local inertia)
pub type Body = (f64, Vector3<f64>, Matrix3<f64>, Matrix3<f64>);

pub fn bodies(model: &ChainModel, q: &DVector<f64>) -> Vec<Body> {
    let r_upper = rot(Vector3::z(), q[0]) * rot(Vector3::y(), q[2]) * rot(Vector3::x(), q[1]);
    let joint2 = r_upper * Vector3::new(0.0, 0.0, -model.cable_length);
    let r_plat = r_upper * rot(Vector3::y(), q[4]) * rot(Vector3::x(), q[3]);
    let center = joint2 + r_plat * Vector3::new(0.0, 0.0, -model.suspension_offset);
    let rr = model.platform_radius * model.platform_radius;
    let disk = Matrix3::from_diagonal(&Vector3::new(rr / 4.0, rr / 4.0, rr / 2.0)) * model.platform_mass;
    let mut out = vec![(model.platform_mass, center, r_plat, disk)];
    let mut r = r_plat;
    let mut p = center + r_plat * model.manipulator_mount_offset;
    for (k, link) in model.manipulator.iter().enumerate() {
        p += r * link.parent_offset;
        r *= rot(link.axis, q[5 + k]);
        out.push((link.mass, p + r * link.com_offset, r, link.inertia));
    }
    out
}

pub fn potential(model: &ChainModel, q: &DVector<f64>) -> f64 {
    let zero = DVector::zeros(q.len());
    bodies(model, q)
        .iter()
        .zip(bodies(model, &zero))
        .map(|(b, r)| b.0 * model.gravity * (b.1.z - r.1.z))
        .sum()
}

/// Kinetic energy from central differences of body poses along `qdot`.
pub fn kinetic_fd(model: &ChainModel, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let h = 1e-6;
    let plus = bodies(model, &(q + qdot * h));
    let minus = bodies(model, &(q - qdot * h));
    plus.iter()
        .zip(&minus)
        .map(|(a, b)| {
            let v = (a.1 - b.1) / (2.0 * h);
            let rel = Rotation3::from_matrix_unchecked(a.2 * b.2.transpose());
            let omega = rel.scaled_axis() / (2.0 * h);
            let mid = (a.2 + b.2) * 0.5;
            let iw = mid * a.3 * mid.transpose();
            0.5 * a.0 * v.norm_squared() + 0.5 * omega.dot(&(iw * omega))
        })
        .sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// In-domain random state: passive angles within ±0.8 rad, rates within ±1.
pub fn random_state(model: &ChainModel, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let n = model.dof();
    let q = DVector::from_fn(n, |i, _| match i {
        0 => rng.random_range(-3.1..3.1),
        1..=4 => rng.random_range(-0.8..0.8),
        _ => rng.random_range(-1.5..1.5),
    });
    let qd = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (q, qd)
}

fn rodrigues(k: Vector3<f64>, theta: f64, x: Vector3<f64>) -> Vector3<f64> {
    x * theta.cos() + k.cross(&x) * theta.sin() + k * k.dot(&x) * (1.0 - theta.cos())
}

/// Octagonal allocation matrix from first principles: arm `i` at `i·45°`, spins `+,−,+,…`.
pub fn allocation_oracle(alpha: &[f64; 8], beta: &[f64; 8], arm_length: f64, drag: f64) -> nalgebra::DMatrix<f64> {
    let mut a = nalgebra::DMatrix::zeros(6, 8);
    for i in 0..8 {
        let phi = i as f64 * std::f64::consts::FRAC_PI_4;
        let d = Vector3::new(phi.cos(), phi.sin(), 0.0);
        let perp = Vector3::new(-phi.sin(), phi.cos(), 0.0);
        let v = rodrigues(perp, beta[i], rodrigues(d, alpha[i], Vector3::z()));
        let spin = if i % 2 == 0 { 1.0 } else { -1.0 };
        let torque = (d * arm_length).cross(&v) + v * (spin * drag);
        for k in 0..3 {
            a[(k, i)] = v[k];
            a[(k + 3, i)] = torque[k];
        }
    }
    a
}

/// `sqrt(λmax / λmin)` of `A Aᵀ`.
pub fn condition_oracle(a: &nalgebra::DMatrix<f64>) -> f64 {
    let eig = (a * a.transpose()).symmetric_eigen().eigenvalues;
    (eig.max() / eig.min()).sqrt()
}

/// Solves `max s : B u = s t, lower ≤ u ≤ upper, s ≥ 0` by visiting every basic solution:
/// with `n = cols + 1` unknowns `(u, s)` and `rows` equalities, each vertex pins `n − rows`
/// unknowns to a bound and solves for the rest.
pub fn vertex_enumeration(b: &nalgebra::DMatrix<f64>, lower: &[f64], upper: &[f64], t: &DVector<f64>) -> Option<f64> {
    let (rows, cols) = b.shape();
    let n = cols + 1;
    let pinned = n - rows;
    let column = |j: usize| -> DVector<f64> { if j < cols { b.column(j).into_owned() } else { -t } };
    let bounds = |j: usize| -> Vec<f64> { if j < cols { vec![lower[j], upper[j]] } else { vec![0.0] } };
    let tol = 1e-9;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != pinned {
            continue;
        }
        let fixed: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let basic: Vec<usize> = (0..n).filter(|j| mask & (1 << j) == 0).collect();
        let basis = nalgebra::DMatrix::from_fn(rows, rows, |r, c| column(basic[c])[r]);
        let mut choices: Vec<Vec<f64>> = vec![vec![]];
        for &j in &fixed {
            choices = choices
                .into_iter()
                .flat_map(|prefix| bounds(j).into_iter().map(move |v| [prefix.clone(), vec![v]].concat()))
                .collect();
        }
        for values in choices {
            let mut x = vec![0.0; n];
            let mut rhs = DVector::zeros(rows);
            for (&j, &v) in fixed.iter().zip(&values) {
                x[j] = v;
                rhs -= column(j) * v;
            }
            let Some(sol) = basis.clone().lu().solve(&rhs) else { continue };
            if (&basis * &sol - &rhs).norm() > 1e-9 {
                continue;
            }
            for (c, &j) in basic.iter().enumerate() {
                x[j] = sol[c];
            }
            let inside = (0..cols).all(|j| x[j] >= lower[j] - tol && x[j] <= upper[j] + tol) && x[cols] >= -tol;
            if inside {
                best = Some(best.map_or(x[cols], |v: f64| v.max(x[cols])));
            }
        }
    }
    best
}
