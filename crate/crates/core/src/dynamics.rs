//! Lumped-mass Lagrangian dynamics of the arm on its prismatic base.
//!
//! Each segment's mass is split into point masses at the midpoints of equal
//! arc intervals. With `J_k` the positional Jacobian of mass `k`,
//!
//! ```text
//! B(q) = m_shaft e₀e₀ᵀ + Σ m_k J_kᵀ J_k        g(q) = −m_shaft e₀ (e_z·g_vec) − Σ m_k J_kᵀ g_vec
//! c_i  = Σ_jk Γ_ijk q̇_j q̇_k,   Γ_ijk = ½(∂B_ij/∂q_k + ∂B_ik/∂q_j − ∂B_jk/∂q_i)
//! ```
//!
//! and the equation of motion is `B q̈ + K q + D q̇ + c + g = τ`.

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};

use crate::actuation;
use crate::kinematics::{self, ArcPoint};
use crate::linalg;
use crate::model::{Configuration, ConfigurationRates, RobotModel};
use crate::{Error, Result};

/// Central-difference step for ∂B/∂q in the Christoffel construction.
pub const CHRISTOFFEL_STEP: f64 = 1.0e-6;

/// Mass matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1.0e12;

/// Largest accepted integration step (s).
pub const MAX_STEP: f64 = 0.01;

/// Terms of `A p + Jᵀf = B q̈ + K q + D q̇ + c + g` at one state.
#[derive(Debug, Clone)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub coriolis: DVector<f64>,
    pub gravity: DVector<f64>,
    /// n × (3·segments + 2) map from flattened pressures to generalized forces.
    pub actuation: DMatrix<f64>,
    pub tip: Vector3<f64>,
    pub jacobian: Matrix3xX<f64>,
    pub jacobian_dot: Matrix3xX<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: Configuration,
    pub qd: ConfigurationRates,
    pub t: f64,
}

impl SimState {
    pub fn at_rest(q: Configuration) -> Self {
        let qd = ConfigurationRates::from_vector(DVector::zeros(q.len())).expect("odd length");
        SimState { q, qd, t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.qd.is_finite() && self.t.is_finite()
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub state: SimState,
    /// A joint limit was reached and enforced during this step.
    pub limit_hit: bool,
}

/// Point masses along the arm: `(point, mass)`.
pub fn lumped_masses(model: &RobotModel) -> Vec<(ArcPoint, f64)> {
    let per = model.lumped_masses_per_segment;
    let mut out = Vec::with_capacity(per * model.segment_count());
    for (segment, &m) in model.segment_masses.iter().enumerate() {
        for j in 0..per {
            let fraction = (j as f64 + 0.5) / per as f64;
            out.push((ArcPoint { segment, fraction }, m / per as f64));
        }
    }
    out
}

fn mass_and_gravity(model: &RobotModel, q: &Configuration) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let masses = lumped_masses(model);
    let points: Vec<ArcPoint> = masses.iter().map(|(p, _)| *p).collect();
    let jacs = kinematics::point_jacobians(model, q, &points)?;
    let n = model.dof();
    let mut b = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    b[(0, 0)] = model.shaft_mass;
    g[0] = -model.shaft_mass * model.gravity.z;
    for ((_, m), pj) in masses.iter().zip(&jacs) {
        b += pj.jacobian.transpose() * &pj.jacobian * *m;
        g -= pj.jacobian.transpose() * model.gravity * *m;
    }
    // exact symmetry regardless of summation order
    let b = (&b + b.transpose()) * 0.5;
    Ok((b, g))
}

pub fn mass_matrix(model: &RobotModel, q: &Configuration) -> Result<DMatrix<f64>> {
    mass_and_gravity(model, q).map(|(b, _)| b)
}

pub fn gravity_vector(model: &RobotModel, q: &Configuration) -> Result<DVector<f64>> {
    mass_and_gravity(model, q).map(|(_, g)| g)
}

/// Gravitational potential energy `−Σ m_k g_vec·p_k` including the shaft.
pub fn potential_energy(model: &RobotModel, q: &Configuration) -> Result<f64> {
    let masses = lumped_masses(model);
    let points: Vec<ArcPoint> = masses.iter().map(|(p, _)| *p).collect();
    let jacs = kinematics::point_jacobians(model, q, &points)?;
    let shaft = -model.shaft_mass * model.gravity.z * q.prismatic();
    Ok(shaft
        - masses
            .iter()
            .zip(&jacs)
            .map(|((_, m), pj)| m * model.gravity.dot(&pj.position))
            .sum::<f64>())
}

pub fn kinetic_energy(mass: &DMatrix<f64>, qd: &ConfigurationRates) -> f64 {
    0.5 * qd.as_vector().dot(&(mass * qd.as_vector()))
}

/// ∂B/∂q_k for every coordinate, by central differences.
fn mass_matrix_gradient(model: &RobotModel, q: &Configuration) -> Result<Vec<DMatrix<f64>>> {
    let n = model.dof();
    let h = CHRISTOFFEL_STEP;
    (0..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let plus = mass_matrix(model, &kinematics::shifted(q, &e, h))?;
            let minus = mass_matrix(model, &kinematics::shifted(q, &e, -h))?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// Coriolis and centrifugal vector from Christoffel symbols of the first kind.
pub fn coriolis_vector(model: &RobotModel, q: &Configuration, qd: &ConfigurationRates) -> Result<DVector<f64>> {
    q.check(model)?;
    qd.check(model)?;
    let n = model.dof();
    if qd.as_vector().iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let db = mass_matrix_gradient(model, q)?;
    let v = qd.as_vector();
    // c = Ḃ q̇ − ½ ∂(q̇ᵀBq̇)/∂q with Ḃ = Σ_k ∂B/∂q_k q̇_k
    let mut b_dot = DMatrix::zeros(n, n);
    for (k, dbk) in db.iter().enumerate() {
        b_dot += dbk * v[k];
    }
    let mut c = &b_dot * v;
    for (i, dbi) in db.iter().enumerate() {
        c[i] -= 0.5 * v.dot(&(dbi * v));
    }
    Ok(c)
}

pub fn stiffness_matrix(model: &RobotModel) -> DMatrix<f64> {
    bend_diagonal(model, &model.segment_stiffness)
}

pub fn damping_matrix(model: &RobotModel) -> DMatrix<f64> {
    bend_diagonal(model, &model.segment_damping)
}

fn bend_diagonal(model: &RobotModel, per_segment: &[f64]) -> DMatrix<f64> {
    let mut d = DVector::zeros(model.dof());
    for (s, &v) in per_segment.iter().enumerate() {
        d[1 + 2 * s] = v;
        d[2 + 2 * s] = v;
    }
    DMatrix::from_diagonal(&d)
}

fn check_state(model: &RobotModel, q: &Configuration, qd: &ConfigurationRates) -> Result<()> {
    q.check(model)?;
    qd.check(model)
}

/// Assembles every term of the equation of motion at `(q, q̇)`.
pub fn assemble_terms(model: &RobotModel, q: &Configuration, qd: &ConfigurationRates) -> Result<DynamicsTerms> {
    check_state(model, q, qd)?;
    let (mass, gravity) = mass_and_gravity(model, q)?;
    let coriolis = coriolis_vector(model, q, qd)?;
    let tip = kinematics::tip_position_and_jacobian(model, q)?;
    let jacobian_dot = kinematics::jacobian_time_derivative(model, q, qd)?;
    Ok(DynamicsTerms {
        mass,
        stiffness: stiffness_matrix(model),
        damping: damping_matrix(model),
        coriolis,
        gravity,
        actuation: actuation::actuation_matrix(model),
        tip: tip.position,
        jacobian: tip.jacobian,
        jacobian_dot,
    })
}

/// `q̈ = B⁻¹(τ − Kq − Dq̇ − c − g)`.
pub fn forward_dynamics(
    model: &RobotModel,
    state: &SimState,
    generalized_force: &DVector<f64>,
) -> Result<ConfigurationRates> {
    forward_dynamics_with_tip_force(model, state, generalized_force, &Vector3::zeros())
}

/// As [`forward_dynamics`] with an additional task-space force at the tip,
/// entering as `Jᵀf`.
pub fn forward_dynamics_with_tip_force(
    model: &RobotModel,
    state: &SimState,
    generalized_force: &DVector<f64>,
    tip_force: &Vector3<f64>,
) -> Result<ConfigurationRates> {
    let (q, qd) = (&state.q, &state.qd);
    check_state(model, q, qd)?;
    let n = model.dof();
    if generalized_force.len() != n || !linalg::is_finite_vec(generalized_force) {
        return Err(Error::Domain(format!(
            "generalized force must be a finite {n}-vector, got length {}",
            generalized_force.len()
        )));
    }
    let (mass, gravity) = mass_and_gravity(model, q)?;
    let coriolis = coriolis_vector(model, q, qd)?;
    let mut rhs = generalized_force
        - stiffness_matrix(model) * q.as_vector()
        - damping_matrix(model) * qd.as_vector()
        - coriolis
        - gravity;
    if tip_force.iter().any(|&f| f != 0.0) {
        rhs += kinematics::tip_jacobian(model, q)?.transpose() * tip_force;
    }

    // A locked prismatic joint removes coordinate 0 from the solve.
    let first = usize::from(model.prismatic_locked);
    let sub_mass = mass.view((first, first), (n - first, n - first)).into_owned();
    let sub_rhs = rhs.rows(first, n - first).into_owned();
    let (lo, hi) = linalg::symmetric_eigen_range(&sub_mass);
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "mass matrix ill-conditioned at q = {:?}: eigenvalues in [{lo:e}, {hi:e}]",
            q.as_vector().as_slice()
        )));
    }
    let chol = sub_mass
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let sub_acc = chol.solve(&sub_rhs);
    let mut acc = DVector::zeros(n);
    acc.rows_mut(first, n - first).copy_from(&sub_acc);
    ConfigurationRates::from_vector(acc)
}

/// One RK4 step under a constant generalized force.
pub fn step(model: &RobotModel, state: &SimState, generalized_force: &DVector<f64>, dt: f64) -> Result<StepReport> {
    step_with(model, state, dt, |_, _| Ok(generalized_force.clone()))
}

/// One RK4 step where the generalized force is re-evaluated at every stage,
/// for actuator forces that depend on the state. Joint limits are enforced
/// after the step by clamping and zeroing the offending velocity.
pub fn step_with<F>(model: &RobotModel, state: &SimState, dt: f64, mut force: F) -> Result<StepReport>
where
    F: FnMut(&Configuration, &ConfigurationRates) -> Result<DVector<f64>>,
{
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::Domain(format!("step size {dt} s outside (0, {MAX_STEP}]")));
    }
    if !state.is_finite() {
        return Err(Error::Simulation {
            t: state.t,
            reason: "state is not finite".into(),
        });
    }
    let mut deriv = |q: &DVector<f64>, qd: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let sq = Configuration::from_vector(q.clone())?;
        let sqd = ConfigurationRates::from_vector(qd.clone())?;
        let tau = force(&sq, &sqd)?;
        let s = SimState {
            q: sq,
            qd: sqd,
            t: state.t,
        };
        let acc = forward_dynamics(model, &s, &tau)?.into_vector();
        Ok((qd.clone(), acc))
    };

    let q0 = state.q.as_vector();
    let v0 = state.qd.as_vector();
    let (k1q, k1v) = deriv(q0, v0)?;
    let (k2q, k2v) = deriv(&(q0 + &k1q * (0.5 * dt)), &(v0 + &k1v * (0.5 * dt)))?;
    let (k3q, k3v) = deriv(&(q0 + &k2q * (0.5 * dt)), &(v0 + &k2v * (0.5 * dt)))?;
    let (k4q, k4v) = deriv(&(q0 + &k3q * dt), &(v0 + &k3v * dt))?;
    let mut q = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
    let mut qd = v0 + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
    let t = state.t + dt;

    if !(linalg::is_finite_vec(&q) && linalg::is_finite_vec(&qd)) {
        return Err(Error::Simulation {
            t,
            reason: "integration produced a non-finite state".into(),
        });
    }
    let limit_hit = enforce_limits(model, &mut q, &mut qd);
    Ok(StepReport {
        state: SimState {
            q: Configuration::from_vector(q)?,
            qd: ConfigurationRates::from_vector(qd)?,
            t,
        },
        limit_hit,
    })
}

fn enforce_limits(model: &RobotModel, q: &mut DVector<f64>, qd: &mut DVector<f64>) -> bool {
    let mut hit = false;
    if model.prismatic_locked {
        q[0] = 0.0;
        qd[0] = 0.0;
    } else {
        hit |= clamp_coordinate(q, qd, 0, 0.0, model.stroke_max);
    }
    for i in 1..q.len() {
        hit |= clamp_coordinate(q, qd, i, -model.bend_limit, model.bend_limit);
    }
    hit
}

fn clamp_coordinate(q: &mut DVector<f64>, qd: &mut DVector<f64>, i: usize, lo: f64, hi: f64) -> bool {
    if q[i] < lo || q[i] > hi {
        q[i] = q[i].clamp(lo, hi);
        qd[i] = 0.0;
        true
    } else {
        false
    }
}
