//! Quasi-static grasp synthesis and stability scoring.
//!
//! A grasp is sampled around a tool's reference wrist pose, fingers close
//! until contact, and stability is the mean normalized resistance to 12
//! axis-aligned disturbance wrenches, each computed as a friction-cone
//! linear program.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::finger::JointType;
use crate::hand::HandModel;
use crate::lp::{solve_lp, LpStatus};
use crate::space::{DesignPoint, DesignSpace, Domain, ParamSpec, TrialRecord};
use crate::tools::ToolModel;
use crate::tpe::{optimize, TpeConfig};
use crate::{Error, Result};

/// Disturbance-test parameters. `delta_p`/`delta_theta` are motion
/// thresholds kept for config fidelity; the quasi-static backend decides
/// stability by force balance, so they are unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrenchTestSpec {
    /// Peak disturbance force, N.
    pub f_max: f64,
    /// Peak disturbance torque, N·m.
    pub tau_max: f64,
    /// Ramp duration, s (only the magnitude ratio matters).
    pub t_max: f64,
    /// Position threshold, mm (unused; see module docs).
    pub delta_p: f64,
    /// Orientation threshold, deg (unused; see module docs).
    pub delta_theta: f64,
    /// Friction-cone linearization edge count m.
    pub cone_edges: usize,
    /// Characteristic length ρ, mm; torques enter the wrench as (p/ρ)×f.
    pub torque_scale: f64,
}

impl Default for WrenchTestSpec {
    fn default() -> Self {
        WrenchTestSpec {
            f_max: 20.0,
            tau_max: 0.6,
            t_max: 1.0,
            delta_p: 5.0,
            delta_theta: 10.0,
            cone_edges: 8,
            torque_scale: 100.0,
        }
    }
}

impl WrenchTestSpec {
    pub fn validate(&self) -> Result<()> {
        let all_pos = [self.f_max, self.tau_max, self.t_max, self.delta_p, self.delta_theta, self.torque_scale]
            .iter()
            .all(|v| *v > 0.0);
        if !all_pos {
            return Err(Error::Eval("wrench test parameters must be positive".into()));
        }
        if self.cone_edges < 3 {
            return Err(Error::Eval("friction cone needs at least 3 edges".into()));
        }
        Ok(())
    }

    /// Peak disturbance magnitude for test direction `i` in the LP's
    /// force units (torques nondimensionalized by ρ; τ_max is N·m, the
    /// scene is mm, hence the 1e3).
    pub fn alpha_max(&self, direction: usize) -> f64 {
        if direction < 6 {
            self.f_max
        } else {
            self.tau_max * 1e3 / self.torque_scale
        }
    }
}

/// Finger-closing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosingConfig {
    /// Coulomb friction coefficient assigned to every contact.
    pub mu: f64,
    /// Per-contact normal-force cap F_cap, N.
    pub f_cap: f64,
    /// Contact tolerance, mm.
    pub contact_tol: f64,
    /// Synchronous closing step Δq, deg.
    pub step_deg: f64,
    /// Include the tool's weight as a constant offset wrench in the
    /// balance (off by default: the synthesis phase suspends the object).
    pub include_gravity: bool,
}

impl Default for ClosingConfig {
    fn default() -> Self {
        ClosingConfig {
            mu: 0.8,
            f_cap: 8.0,
            contact_tol: 0.5,
            step_deg: 1.0,
            include_gravity: false,
        }
    }
}

/// Symmetric wrist-perturbation bounds plus per-digit spread ranges.
#[derive(Debug, Clone)]
pub struct PerturbBounds {
    /// Per-axis translation half-ranges, mm.
    pub translation: [f64; 3],
    /// Per-axis rotation half-ranges, deg.
    pub rotation: [f64; 3],
    /// Per-chain Side-joint preshape ranges (lo, hi) deg, aligned with
    /// `HandModel::chains`; (0, 0) for digits without a Side joint.
    pub spread: Vec<(f64, f64)>,
}

impl PerturbBounds {
    pub fn validate(&self) -> Result<()> {
        if self.translation.iter().chain(self.rotation.iter()).any(|b| *b < 0.0) {
            return Err(Error::Eval("perturbation bounds must be nonnegative".into()));
        }
        if self.spread.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::Eval("spread ranges must satisfy lo <= hi".into()));
        }
        Ok(())
    }
}

/// Default bounds: ±10 mm / ±10° wrist perturbation, ±20° spread for
/// every digit that can both splay (Side joint) and close (Grasp
/// joint); digits that cannot close keep a fixed preshape, so varying
/// their spread would only add noise dimensions to the grasp search.
pub fn default_bounds(hand: &HandModel) -> PerturbBounds {
    let spread = hand
        .chains
        .iter()
        .map(|(_, c)| {
            let splays = c.joints.iter().any(|j| j.spec.jtype == JointType::Side);
            let closes = c.joints.iter().any(|j| j.spec.jtype == JointType::Grasp);
            if splays && closes {
                (-20.0, 20.0)
            } else {
                (0.0, 0.0)
            }
        })
        .collect();
    PerturbBounds { translation: [10.0; 3], rotation: [10.0; 3], spread }
}

/// One sampled grasp: open-preshape joint angles, the wrist pose in the
/// object frame, and the per-digit spread angles baked into `q0`.
#[derive(Debug, Clone)]
pub struct GraspConfig {
    /// Joint angles, deg, flattened over `HandModel::chains` in order.
    pub q0: Vec<f64>,
    /// Wrist (hand-frame) pose in the object frame.
    pub t_grasp: Isometry3<f64>,
    /// Per-chain spread angles, deg (0 where not applicable).
    pub spread: Vec<f64>,
}

/// A point contact in the object frame.
#[derive(Debug, Clone)]
pub struct Contact {
    /// Contact location on the tool surface, mm.
    pub point: Point3<f64>,
    /// Unit normal pointing into the object.
    pub normal: Vector3<f64>,
    pub mu: f64,
    /// Normal-force cap, N.
    pub cap: f64,
    /// Tangent frame anchoring the linearized cone edges. `None` derives
    /// a deterministic frame from the normal; an explicit frame makes the
    /// polyhedral cone part of the scene, so rigidly rotating contacts
    /// (frame included) rotates the cone exactly.
    pub tangent: Option<(Vector3<f64>, Vector3<f64>)>,
}

impl Contact {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>, mu: f64, cap: f64) -> Contact {
        Contact { point, normal, mu, cap, tangent: None }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Eval("contact normal must be unit length".into()));
        }
        if self.mu < 0.0 || self.cap <= 0.0 {
            return Err(Error::Eval("contact needs mu >= 0 and cap > 0".into()));
        }
        if let Some((t1, t2)) = &self.tangent {
            let ortho = t1.dot(&self.normal).abs().max(t2.dot(&self.normal).abs()).max(t1.dot(t2).abs());
            if ortho > 1e-9 || (t1.norm() - 1.0).abs() > 1e-9 || (t2.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Eval("tangent frame must be orthonormal to the normal".into()));
            }
        }
        Ok(())
    }

    /// The cone's tangent frame: explicit if set, else derived from the
    /// normal.
    pub fn frame(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.tangent.unwrap_or_else(|| tangent_basis(&self.normal))
    }
}

/// Result of closing the fingers: extracted contacts plus the final
/// joint angles (deg, flattened like `GraspConfig::q0`).
#[derive(Debug, Clone, Default)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
    /// Touching body per contact ("palm" or "{digit}_link{i}"), parallel
    /// to `contacts`; empty for synthetic sets.
    pub sources: Vec<String>,
    /// True when the preshape already interpenetrated the tool.
    pub infeasible: bool,
    pub final_q: Vec<f64>,
}

/// Per-direction normalized resistances and their mean (Eq. 1 analogue).
#[derive(Debug, Clone)]
pub struct StabilityScore {
    pub per_direction: [f64; 12],
    pub s_t: f64,
}

impl StabilityScore {
    /// Normalized stable time per direction: the linear disturbance ramp
    /// makes the stable-time fraction equal the magnitude fraction
    /// clamp(α/α_max, 0, 1).
    pub fn from_alphas(alphas: &[f64; 12], spec: &WrenchTestSpec) -> StabilityScore {
        let mut per_direction = [0.0; 12];
        for (i, &a) in alphas.iter().enumerate() {
            per_direction[i] = (a / spec.alpha_max(i)).clamp(0.0, 1.0);
        }
        let s_t = per_direction.iter().sum::<f64>() / 12.0;
        StabilityScore { per_direction, s_t }
    }

    pub fn zero() -> StabilityScore {
        StabilityScore { per_direction: [0.0; 12], s_t: 0.0 }
    }
}

/// The 12 axis-aligned unit test wrenches: ±force x/y/z then ±torque
/// x/y/z (torque components already nondimensionalized by ρ).
pub fn test_directions() -> [Vector6<f64>; 12] {
    let mut out = [Vector6::zeros(); 12];
    for axis in 0..3 {
        out[axis][axis] = 1.0;
        out[axis + 3][axis] = -1.0;
        out[axis + 6][axis + 3] = 1.0;
        out[axis + 9][axis + 3] = -1.0;
    }
    out
}

fn uniform_sym<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.gen_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Samples a grasp around the tool's reference wrist pose:
/// T_grasp = T_wrist · T_perturb, spreads uniform per digit, all other
/// joints at zero (open preshape).
pub fn sample_grasp(
    hand: &HandModel,
    tool: &ToolModel,
    bounds: &PerturbBounds,
    seed: u64,
) -> Result<GraspConfig> {
    bounds.validate()?;
    if bounds.spread.len() != hand.chains.len() {
        return Err(Error::Eval("one spread range per digit required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Vector3::new(
        uniform_sym(&mut rng, bounds.translation[0]),
        uniform_sym(&mut rng, bounds.translation[1]),
        uniform_sym(&mut rng, bounds.translation[2]),
    );
    let r = Vector3::new(
        uniform_sym(&mut rng, bounds.rotation[0]).to_radians(),
        uniform_sym(&mut rng, bounds.rotation[1]).to_radians(),
        uniform_sym(&mut rng, bounds.rotation[2]).to_radians(),
    );
    let spread: Vec<f64> = bounds
        .spread
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect();
    let perturb = Isometry3::from_parts(
        Translation3::from(t),
        UnitQuaternion::from_euler_angles(r.x, r.y, r.z),
    );
    Ok(build_config(hand, tool.wrist_pose * perturb, &spread))
}

/// Assembles a `GraspConfig` from a wrist pose and per-chain spreads:
/// zeros everywhere except each chain's first Side joint.
pub fn build_config(hand: &HandModel, t_grasp: Isometry3<f64>, spread: &[f64]) -> GraspConfig {
    let mut q0 = Vec::with_capacity(hand.joint_count());
    for (ci, (_, chain)) in hand.chains.iter().enumerate() {
        let mut side_done = false;
        for joint in &chain.joints {
            let v = if !side_done && joint.spec.jtype == JointType::Side {
                side_done = true;
                let (lo, hi) = joint.spec.limits_deg;
                spread.get(ci).copied().unwrap_or(0.0).clamp(lo, hi)
            } else {
                0.0
            };
            q0.push(v);
        }
    }
    GraspConfig { q0, t_grasp, spread: spread.to_vec() }
}

/// Sample points of one rigid body (palm or chain link) in its own frame.
struct Body {
    name: String,
    points: Vec<Point3<f64>>,
}

/// Bodies in pose order: palm first, then every chain's links in order.
fn gather_bodies(hand: &HandModel) -> Vec<Body> {
    let mut bodies = Vec::new();
    let palm_pts: Vec<Point3<f64>> =
        hand.palm_collision.iter().flat_map(|p| p.mesh().vertices.iter().copied()).collect();
    bodies.push(Body { name: "palm".into(), points: palm_pts });
    for (digit, chain) in &hand.chains {
        for (li, link) in chain.links.iter().enumerate() {
            bodies.push(Body {
                name: format!("{digit}_link{li}"),
                points: link.collider.mesh().vertices.clone(),
            });
        }
    }
    bodies
}

/// Closest sample point of `body` to the tool surface under `pose`
/// (object frame), as (signed distance, world point).
fn body_distance(tool: &ToolModel, body: &Body, pose: &Isometry3<f64>) -> (f64, Point3<f64>) {
    let mut best = (f64::INFINITY, Point3::origin());
    for p in &body.points {
        let w = pose * p;
        let d = tool.sdf(w);
        if d < best.0 {
            best = (d, w);
        }
    }
    best
}

/// Closes Grasp joints synchronously in Δq steps; each joint stops when a
/// link distal to it reaches the contact tolerance or the joint limit.
/// One contact is emitted per touching link (closest point, normal into
/// the object). Initial interpenetration yields an empty set flagged
/// infeasible.
pub fn close_fingers(
    hand: &HandModel,
    tool: &ToolModel,
    g: &GraspConfig,
    cfg: &ClosingConfig,
) -> Result<ContactSet> {
    if g.q0.len() != hand.joint_count() {
        return Err(Error::Eval(format!(
            "q0 has {} angles for a {}-joint hand",
            g.q0.len(),
            hand.joint_count()
        )));
    }
    let bodies = gather_bodies(hand);
    // Split q0 per chain (deg).
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(hand.chains.len());
    let mut cursor = 0;
    for (_, chain) in &hand.chains {
        q.push(g.q0[cursor..cursor + chain.joints.len()].to_vec());
        cursor += chain.joints.len();
    }
    let poses = |q: &[Vec<f64>]| -> Result<Vec<Isometry3<f64>>> {
        // Object-frame pose per body, palm first.
        let mut out = vec![g.t_grasp];
        for (ci, (_, chain)) in hand.chains.iter().enumerate() {
            let rad: Vec<f64> = q[ci].iter().map(|a| a.to_radians()).collect();
            for frame in chain.fk(&rad)? {
                out.push(g.t_grasp * frame);
            }
        }
        Ok(out)
    };
    let distances = |q: &[Vec<f64>]| -> Result<Vec<(f64, Point3<f64>)>> {
        let ps = poses(q)?;
        Ok(bodies.iter().zip(&ps).map(|(b, p)| body_distance(tool, b, p)).collect())
    };

    let initial = distances(&q)?;
    if initial.iter().any(|(d, _)| *d < -cfg.contact_tol) {
        return Ok(ContactSet {
            contacts: Vec::new(),
            sources: Vec::new(),
            infeasible: true,
            final_q: g.q0.clone(),
        });
    }

    let mut stopped: Vec<Vec<bool>> =
        hand.chains.iter().map(|(_, c)| vec![false; c.joints.len()]).collect();
    let guard = (360.0 / cfg.step_deg).ceil() as usize + 8;
    for _ in 0..guard {
        let dist = distances(&q)?;
        let mut moved = false;
        let mut body_idx_base = 1; // body 0 is the palm
        for (ci, (_, chain)) in hand.chains.iter().enumerate() {
            for (ji, joint) in chain.joints.iter().enumerate() {
                if joint.spec.jtype != JointType::Grasp || stopped[ci][ji] {
                    continue;
                }
                let (_, hi) = joint.spec.limits_deg;
                if q[ci][ji] >= hi {
                    stopped[ci][ji] = true;
                    continue;
                }
                // Any link distal to this joint already at the tool?
                let touching = (ji..chain.links.len())
                    .any(|li| dist[body_idx_base + li].0 <= cfg.contact_tol);
                if touching {
                    stopped[ci][ji] = true;
                } else {
                    q[ci][ji] = (q[ci][ji] + cfg.step_deg).min(hi);
                    moved = true;
                }
            }
            body_idx_base += chain.links.len();
        }
        if !moved {
            break;
        }
    }

    let final_dist = distances(&q)?;
    let mut contacts = Vec::new();
    let mut sources = Vec::new();
    for (body, (d, at)) in bodies.iter().zip(&final_dist) {
        if *d <= cfg.contact_tol {
            let point = tool.project(*at);
            let outward = tool.normal(point);
            contacts.push(Contact::new(point, -outward, cfg.mu, cfg.f_cap));
            sources.push(body.name.clone());
        }
    }
    let final_q = q.into_iter().flatten().collect();
    Ok(ContactSet { contacts, sources, infeasible: false, final_q })
}

/// Orthonormal tangent basis perpendicular to a unit normal.
fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&a).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Unit wrenches of a contact's m linearized cone edges:
/// e_j = n + μ(cos θ_j t1 + sin θ_j t2), wrench [e; (p/ρ)×e].
pub fn cone_edge_wrenches(contact: &Contact, spec: &WrenchTestSpec) -> Vec<Vector6<f64>> {
    let (t1, t2) = contact.frame();
    let arm = contact.point.coords / spec.torque_scale;
    (0..spec.cone_edges)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / spec.cone_edges as f64;
            let e = contact.normal + contact.mu * (th.cos() * t1 + th.sin() * t2);
            let tau = arm.cross(&e);
            Vector6::new(e.x, e.y, e.z, tau.x, tau.y, tau.z)
        })
        .collect()
}

/// Largest disturbance magnitude α balanceable along `w_hat`, with an
/// optional constant offset wrench (e.g. gravity) in the balance:
/// Σ_c W_c β_c + α·ŵ + w_off = 0, β ≥ 0, per-contact Σβ ≤ cap.
pub fn resist_with_offset(
    set: &ContactSet,
    w_hat: &Vector6<f64>,
    offset: Option<&Vector6<f64>>,
    spec: &WrenchTestSpec,
) -> Result<f64> {
    spec.validate()?;
    if set.infeasible || set.contacts.is_empty() {
        return Ok(0.0);
    }
    for c in &set.contacts {
        c.validate()?;
    }
    let m = spec.cone_edges;
    let nvars = set.contacts.len() * m + 1; // betas then alpha
    let mut c_obj = vec![0.0; nvars];
    c_obj[nvars - 1] = 1.0;
    let mut a_eq = vec![vec![0.0; nvars]; 6];
    let mut b_eq = vec![0.0; 6];
    for (ci, contact) in set.contacts.iter().enumerate() {
        for (j, w) in cone_edge_wrenches(contact, spec).iter().enumerate() {
            for r in 0..6 {
                a_eq[r][ci * m + j] = w[r];
            }
        }
    }
    for r in 0..6 {
        a_eq[r][nvars - 1] = w_hat[r];
        b_eq[r] = -offset.map(|o| o[r]).unwrap_or(0.0);
    }
    let mut a_ub: Vec<Vec<f64>> = (0..set.contacts.len())
        .map(|ci| {
            let mut row = vec![0.0; nvars];
            for j in 0..m {
                row[ci * m + j] = 1.0;
            }
            row
        })
        .collect();
    let mut b_ub: Vec<f64> = set.contacts.iter().map(|c| c.cap).collect();
    // α is bounded by the total attainable wrench magnitude (‖ŵ‖ = 1);
    // stating the bound explicitly keeps degenerate tableaus from
    // drifting into spurious unboundedness.
    let alpha_bound: f64 = set
        .contacts
        .iter()
        .map(|c| {
            let peak = cone_edge_wrenches(c, spec).iter().map(|w| w.norm()).fold(0.0, f64::max);
            c.cap * peak
        })
        .sum();
    let mut alpha_row = vec![0.0; nvars];
    alpha_row[nvars - 1] = 1.0;
    a_ub.push(alpha_row);
    b_ub.push(2.0 * alpha_bound + 1.0);
    let sol = solve_lp(&c_obj, &a_eq, &b_eq, &a_ub, &b_ub)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective.max(0.0)),
        // With an offset the zero point may be outside the reachable
        // wrench set; nothing is resistible then.
        LpStatus::Infeasible => Ok(0.0),
        LpStatus::Unbounded => Err(Error::Lp("unbounded resistance".into())),
    }
}

/// `resist_with_offset` without an offset wrench (the default balance).
pub fn resist_magnitude(
    set: &ContactSet,
    w_hat: &Vector6<f64>,
    spec: &WrenchTestSpec,
) -> Result<f64> {
    resist_with_offset(set, w_hat, None, spec)
}

/// Eq. 1 analogue: mean clamped α/α_max over the 12 test directions.
pub fn grasp_score(set: &ContactSet, spec: &WrenchTestSpec) -> Result<StabilityScore> {
    grasp_score_with_offset(set, None, spec)
}

/// `grasp_score` with a constant offset wrench in every balance.
pub fn grasp_score_with_offset(
    set: &ContactSet,
    offset: Option<&Vector6<f64>>,
    spec: &WrenchTestSpec,
) -> Result<StabilityScore> {
    if set.infeasible || set.contacts.is_empty() {
        return Ok(StabilityScore::zero());
    }
    let mut alphas = [0.0; 12];
    for (i, dir) in test_directions().iter().enumerate() {
        alphas[i] = resist_with_offset(set, dir, offset, spec)?;
    }
    Ok(StabilityScore::from_alphas(&alphas, spec))
}

/// Gravity offset wrench for a tool in the object frame (N, torque
/// nondimensionalized by ρ), acting at the tool's center of mass.
pub fn gravity_wrench(tool: &ToolModel, spec: &WrenchTestSpec) -> Vector6<f64> {
    let f = Vector3::new(0.0, 0.0, -9.81 * tool.mass);
    let tau = (tool.com().coords / spec.torque_scale).cross(&f);
    Vector6::new(f.x, f.y, f.z, tau.x, tau.y, tau.z)
}

/// Eq. 2: S_h = (1/(K·T)) Σ_t Σ_{k≤K} best scores. Every tool must carry
/// at least K evaluated grasps.
pub fn hand_score(per_tool: &[(String, Vec<f64>)], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Eval("K must be at least 1".into()));
    }
    if per_tool.is_empty() {
        return Err(Error::Eval("at least one tool required".into()));
    }
    let mut total = 0.0;
    for (name, scores) in per_tool {
        if scores.len() < k {
            return Err(Error::Eval(format!(
                "tool {name} has {} grasp scores, need at least {k}",
                scores.len()
            )));
        }
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        total += sorted[..k].iter().sum::<f64>();
    }
    Ok(total / (k as f64 * per_tool.len() as f64))
}

/// Result of a grasp optimization run.
#[derive(Debug, Clone)]
pub struct GraspOutcome {
    pub config: GraspConfig,
    pub score: f64,
    pub history: Vec<TrialRecord>,
}

/// Builds the per-hand-and-tool grasp search space: 6 wrist-perturbation
/// dimensions plus one spread angle per digit with a Side joint.
pub fn build_grasp_space(hand: &HandModel, bounds: &PerturbBounds) -> Result<DesignSpace> {
    let mut params = Vec::new();
    let axes = ["x", "y", "z"];
    for (i, axis) in axes.iter().enumerate() {
        let b = bounds.translation[i].max(1e-9);
        params.push(ParamSpec::new(&format!("d{axis}"), Domain::continuous(-b, b, "mm"), "perturb"));
    }
    for (i, axis) in axes.iter().enumerate() {
        let b = bounds.rotation[i].max(1e-9);
        params.push(ParamSpec::new(&format!("r{axis}"), Domain::continuous(-b, b, "deg"), "perturb"));
    }
    for (ci, (digit, _)) in hand.chains.iter().enumerate() {
        let (lo, hi) = bounds.spread.get(ci).copied().unwrap_or((0.0, 0.0));
        if hi > lo {
            params.push(ParamSpec::new(
                &format!("spread_{digit}"),
                Domain::continuous(lo, hi, "deg"),
                "spread",
            ));
        }
    }
    DesignSpace::new("grasp_v1", params)
}

/// Decodes a grasp-space point into a `GraspConfig` for this hand/tool.
pub fn config_from_point(
    hand: &HandModel,
    tool: &ToolModel,
    point: &DesignPoint,
) -> Result<GraspConfig> {
    let f = |name: &str| {
        point.f64(name).ok_or_else(|| Error::InvalidPoint(format!("missing parameter {name}")))
    };
    let t = Vector3::new(f("dx")?, f("dy")?, f("dz")?);
    let r = Vector3::new(
        f("rx")?.to_radians(),
        f("ry")?.to_radians(),
        f("rz")?.to_radians(),
    );
    let perturb = Isometry3::from_parts(
        Translation3::from(t),
        UnitQuaternion::from_euler_angles(r.x, r.y, r.z),
    );
    let spread: Vec<f64> = hand
        .chains
        .iter()
        .map(|(digit, _)| point.f64(&format!("spread_{digit}")).unwrap_or(0.0))
        .collect();
    Ok(build_config(hand, tool.wrist_pose * perturb, &spread))
}

/// TPE loop over grasp configurations for one hand/tool pair; the
/// objective is the quasi-static stability score S_t.
pub fn optimize_grasp(
    hand: &HandModel,
    tool: &ToolModel,
    budget: usize,
    seed: u64,
) -> Result<GraspOutcome> {
    optimize_grasp_with(
        hand,
        tool,
        budget,
        seed,
        &default_bounds(hand),
        &ClosingConfig::default(),
        &WrenchTestSpec::default(),
    )
}

pub fn optimize_grasp_with(
    hand: &HandModel,
    tool: &ToolModel,
    budget: usize,
    seed: u64,
    bounds: &PerturbBounds,
    closing: &ClosingConfig,
    spec: &WrenchTestSpec,
) -> Result<GraspOutcome> {
    bounds.validate()?;
    spec.validate()?;
    let space = build_grasp_space(hand, bounds)?;
    let offset = closing.include_gravity.then(|| gravity_wrench(tool, spec));
    let objective = |point: &DesignPoint| -> Result<f64> {
        let g = config_from_point(hand, tool, point)?;
        let set = close_fingers(hand, tool, &g, closing)?;
        Ok(grasp_score_with_offset(&set, offset.as_ref(), spec)?.s_t)
    };
    // The grasp space is low-dimensional and its feasible pocket small;
    // a slightly larger elite fraction and candidate pool with more
    // startup coverage works better here than the library default.
    let config = TpeConfig { gamma: 0.15, n_startup: 15, n_candidates: 32, prior_weight: 0.5 };
    let (best, history) = optimize(objective, &space, budget, config, seed)?;
    let config = config_from_point(hand, tool, &best.point)?;
    Ok(GraspOutcome { config, score: best.score, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::{build_hand, DigitPose, HandConfig, HandParams};
    use crate::surface::SurfaceKernel;
    use crate::tools::{builtin_tools, Primitive, PosedPrimitive};
    use approx::assert_relative_eq;

    fn reference_hand() -> HandModel {
        let params = HandParams {
            finger_code: "1-1-1".into(),
            thumb_code: "1-22".into(),
            finger_number: 3,
            finger0: DigitPose { angle_deg: 10.0, normal_offset: 2.0, side_offset: 5.0 },
            finger1: DigitPose { angle_deg: 0.0, normal_offset: 4.0, side_offset: 0.0 },
            finger2: DigitPose { angle_deg: -10.0, normal_offset: 2.0, side_offset: -5.0 },
            thumb: DigitPose { angle_deg: 5.0, normal_offset: 3.0, side_offset: -10.0 },
            pad_max_height: 6.0,
            kernels: vec![
                SurfaceKernel { center_angle: 30.0, center_offset: 0.3, spread: 0.15, intensity: 0.5 },
                SurfaceKernel { center_angle: 220.0, center_offset: 0.2, spread: 0.1, intensity: 0.4 },
            ],
            tip_scale: (1.0, 1.1, 1.0),
            added_lengths: [2.0, 1.0, 0.5, 0.0],
        };
        build_hand(&params, &HandConfig::default()).unwrap()
    }

    /// Sphere-like tool (short fat capsule) at a given center.
    fn sphere_tool(radius: f64, center: [f64; 3]) -> ToolModel {
        ToolModel {
            name: "ball".into(),
            primitives: vec![PosedPrimitive {
                primitive: Primitive::Capsule { radius, half_len: 0.01 },
                pose: Isometry3::translation(center[0], center[1], center[2]),
            }],
            mass: 0.1,
            wrist_pose: Isometry3::identity(),
        }
    }

    /// A ball hanging in the fingers' closing workspace: above the
    /// finger plane (z = 18 mm) and forward of the palm rim.
    fn graspable_ball() -> ToolModel {
        sphere_tool(22.0, [0.0, 100.0, 55.0])
    }

    fn contact(p: [f64; 3], n: [f64; 3], mu: f64, cap: f64) -> Contact {
        Contact::new(
            Point3::new(p[0], p[1], p[2]),
            Vector3::new(n[0], n[1], n[2]).normalize(),
            mu,
            cap,
        )
    }

    fn set_of(contacts: Vec<Contact>) -> ContactSet {
        ContactSet { contacts, ..ContactSet::default() }
    }

    // ---- sampling -------------------------------------------------------

    #[test]
    fn zero_bounds_reproduce_wrist_pose() {
        let hand = reference_hand();
        let tool = &builtin_tools()[0];
        let bounds = PerturbBounds {
            translation: [0.0; 3],
            rotation: [0.0; 3],
            spread: vec![(0.0, 0.0); hand.chains.len()],
        };
        let g = sample_grasp(&hand, tool, &bounds, 7).unwrap();
        let delta = g.t_grasp.inverse() * tool.wrist_pose;
        assert!(delta.translation.vector.norm() < 1e-12);
        assert!(delta.rotation.angle() < 1e-12);
        assert!(g.q0.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn sampled_perturbations_stay_within_bounds() {
        let hand = reference_hand();
        let tool = &builtin_tools()[0];
        let bounds = default_bounds(&hand);
        for seed in 0..10_000 {
            let g = sample_grasp(&hand, tool, &bounds, seed).unwrap();
            let perturb = tool.wrist_pose.inverse() * g.t_grasp;
            let t = perturb.translation.vector;
            for (axis, b) in t.iter().zip(&bounds.translation) {
                assert!(axis.abs() <= b + 1e-9);
            }
            // Total rotation is bounded by the sum of per-axis bounds.
            let max_angle: f64 = bounds.rotation.iter().map(|d| d.to_radians()).sum();
            assert!(perturb.rotation.angle() <= max_angle + 1e-9);
            for (s, (lo, hi)) in g.spread.iter().zip(&bounds.spread) {
                assert!(*s >= lo - 1e-9 && *s <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let hand = reference_hand();
        let tool = &builtin_tools()[1];
        let bounds = default_bounds(&hand);
        let a = sample_grasp(&hand, tool, &bounds, 42).unwrap();
        let b = sample_grasp(&hand, tool, &bounds, 42).unwrap();
        assert_eq!(a.q0, b.q0);
        assert_eq!(a.t_grasp, b.t_grasp);
    }

    // ---- closing --------------------------------------------------------

    #[test]
    fn distant_tool_gives_no_contacts_and_full_closure() {
        let hand = reference_hand();
        let tool = sphere_tool(30.0, [0.0, 0.0, 1_000_000.0]);
        let g = build_config(&hand, Isometry3::identity(), &vec![0.0; hand.chains.len()]);
        let set = close_fingers(&hand, &tool, &g, &ClosingConfig::default()).unwrap();
        assert!(set.contacts.is_empty());
        assert!(!set.infeasible);
        let mut cursor = 0;
        for (_, chain) in &hand.chains {
            for (ji, joint) in chain.joints.iter().enumerate() {
                if joint.spec.jtype == JointType::Grasp {
                    let (_, hi) = joint.spec.limits_deg;
                    assert_relative_eq!(set.final_q[cursor + ji], hi, epsilon = 1e-9);
                }
            }
            cursor += chain.joints.len();
        }
    }

    #[test]
    fn centered_sphere_touches_every_digit() {
        let hand = reference_hand();
        let tool = graspable_ball();
        let g = build_config(&hand, Isometry3::identity(), &vec![0.0; hand.chains.len()]);
        let cfg = ClosingConfig::default();
        let set = close_fingers(&hand, &tool, &g, &cfg).unwrap();
        assert!(!set.infeasible);
        assert!(set.contacts.len() >= 3, "only {} contacts", set.contacts.len());
        // One contact per digit: the three fingers all reach the ball.
        let digits: std::collections::BTreeSet<&str> = set
            .sources
            .iter()
            .filter_map(|s| s.split("_link").next())
            .filter(|d| *d != "palm")
            .collect();
        assert!(digits.len() >= 3, "touching digits: {digits:?}");
        // Signed-distance oracle: every contact lies on the surface and
        // its normal opposes the outward gradient.
        for c in &set.contacts {
            assert!(tool.sdf(c.point).abs() < 1e-6);
            assert!((c.normal + tool.normal(c.point)).norm() < 1e-6);
        }
    }

    #[test]
    fn interpenetrating_preshape_is_infeasible() {
        let hand = reference_hand();
        // Sphere centered inside the palm body.
        let tool = sphere_tool(40.0, [0.0, 0.0, 5.0]);
        let g = build_config(&hand, Isometry3::identity(), &vec![0.0; hand.chains.len()]);
        let set = close_fingers(&hand, &tool, &g, &ClosingConfig::default()).unwrap();
        assert!(set.infeasible);
        assert!(set.contacts.is_empty());
        assert_relative_eq!(
            grasp_score(&set, &WrenchTestSpec::default()).unwrap().s_t,
            0.0
        );
    }

    // ---- resistance -----------------------------------------------------

    #[test]
    fn empty_contacts_resist_nothing() {
        let spec = WrenchTestSpec::default();
        for dir in test_directions() {
            assert_eq!(resist_magnitude(&set_of(vec![]), &dir, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_frictionless_contact_balances_opposing_force() {
        // Normal +z (force pushes along +z), disturbance −z: the contact
        // must supply +z force α, capped at 10 N.
        let spec = WrenchTestSpec::default();
        let set = set_of(vec![contact([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.0, 10.0)]);
        let minus_z = Vector6::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0);
        let alpha = resist_magnitude(&set, &minus_z, &spec).unwrap();
        assert_relative_eq!(alpha, 10.0, epsilon = 1e-7);
        // The same contact cannot resist a +z disturbance at all.
        let plus_z = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(
            resist_magnitude(&set, &plus_z, &spec).unwrap(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn adding_a_contact_never_decreases_alpha() {
        let spec = WrenchTestSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let mut contacts: Vec<Contact> = (0..3)
                .map(|_| random_contact(&mut rng))
                .collect();
            let base = set_of(contacts.clone());
            contacts.push(random_contact(&mut rng));
            let bigger = set_of(contacts);
            for dir in test_directions() {
                let a = resist_magnitude(&base, &dir, &spec).unwrap();
                let b = resist_magnitude(&bigger, &dir, &spec).unwrap();
                assert!(b >= a - 1e-7, "alpha dropped from {a} to {b}");
            }
        }
    }

    #[test]
    fn doubling_caps_doubles_alpha() {
        let spec = WrenchTestSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let contacts: Vec<Contact> = (0..3).map(|_| random_contact(&mut rng)).collect();
            let doubled: Vec<Contact> = contacts
                .iter()
                .map(|c| Contact { cap: 2.0 * c.cap, ..c.clone() })
                .collect();
            for dir in test_directions() {
                let a = resist_magnitude(&set_of(contacts.clone()), &dir, &spec).unwrap();
                let b = resist_magnitude(&set_of(doubled.clone()), &dir, &spec).unwrap();
                assert_relative_eq!(b, 2.0 * a, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn rigid_rotation_leaves_alpha_invariant() {
        let spec = WrenchTestSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let contacts: Vec<Contact> = (0..3).map(|_| random_contact(&mut rng)).collect();
            let rot = UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            // Rotating the scene rigidly includes the contact tangent
            // frames, so the linearized cones rotate exactly.
            let rotated: Vec<Contact> = contacts
                .iter()
                .map(|c| {
                    let (t1, t2) = c.frame();
                    Contact {
                        point: rot * c.point,
                        normal: rot * c.normal,
                        tangent: Some((rot * t1, rot * t2)),
                        ..c.clone()
                    }
                })
                .collect();
            for (di, dir) in test_directions().iter().enumerate() {
                let f = rot * Vector3::new(dir[0], dir[1], dir[2]);
                let t = rot * Vector3::new(dir[3], dir[4], dir[5]);
                let dir_rot = Vector6::new(f.x, f.y, f.z, t.x, t.y, t.z);
                let a = resist_magnitude(&set_of(contacts.clone()), dir, &spec).unwrap();
                let b = resist_magnitude(&set_of(rotated.clone()), &dir_rot, &spec).unwrap();
                assert!(
                    (a - b).abs() < 1e-9 * a.max(1.0),
                    "trial {trial} dir {di}: {a} vs {b}"
                );
            }
        }
    }

    // ---- LP vs brute-force hull-membership oracle -----------------------

    use crate::oracles::oracle_alpha;

    fn random_contact(rng: &mut ChaCha8Rng) -> Contact {
        let n = loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        Contact::new(
            Point3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
            ),
            n,
            rng.gen_range(0.0..1.0),
            rng.gen_range(1.0..20.0),
        )
    }

    #[test]
    fn lp_matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let dirs = test_directions();
        for instance in 0..50 {
            let n_contacts = rng.gen_range(1..=4);
            let m = rng.gen_range(4..=8);
            let spec = WrenchTestSpec { cone_edges: m, ..WrenchTestSpec::default() };
            let set = set_of((0..n_contacts).map(|_| random_contact(&mut rng)).collect());
            let di = rng.gen_range(0..12);
            let start = std::time::Instant::now();
            let lp = resist_magnitude(&set, &dirs[di], &spec).unwrap();
            let oracle = oracle_alpha(&set, &dirs[di], &spec);
            let tol = 1e-3 * spec.alpha_max(di);
            assert!(
                (lp - oracle).abs() <= tol,
                "instance {instance}: LP {lp} vs oracle {oracle} (tol {tol})"
            );
            assert!(start.elapsed().as_secs_f64() < 1.0, "instance {instance} too slow");
        }
    }

    // ---- scoring --------------------------------------------------------

    #[test]
    fn full_resistance_scores_one() {
        let spec = WrenchTestSpec::default();
        let alphas = [spec.f_max.max(spec.alpha_max(6)) * 2.0; 12];
        assert_relative_eq!(StabilityScore::from_alphas(&alphas, &spec).s_t, 1.0);
    }

    #[test]
    fn half_resistance_arithmetic() {
        // Six directions at full resistance, six at half → 0.75.
        let spec = WrenchTestSpec::default();
        let mut alphas = [0.0; 12];
        for i in 0..12 {
            alphas[i] = if i < 6 { spec.alpha_max(i) } else { 0.5 * spec.alpha_max(i) };
        }
        let score = StabilityScore::from_alphas(&alphas, &spec);
        assert_relative_eq!(score.s_t, 0.75);
        assert_relative_eq!(
            score.s_t,
            score.per_direction.iter().sum::<f64>() / 12.0
        );
    }

    #[test]
    fn scores_stay_in_unit_interval_on_random_sets() {
        let spec = WrenchTestSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(0..5);
            let set = set_of((0..n).map(|_| random_contact(&mut rng)).collect());
            let score = grasp_score(&set, &spec).unwrap();
            assert!((0.0..=1.0).contains(&score.s_t));
            for v in score.per_direction {
                assert!((0.0..=1.0).contains(&v));
            }
            assert_relative_eq!(score.s_t, score.per_direction.iter().sum::<f64>() / 12.0);
        }
    }

    #[test]
    fn hand_score_arithmetic() {
        let one_tool = vec![("hammer".to_string(), vec![1.0, 0.5, 0.2])];
        assert_relative_eq!(hand_score(&one_tool, 2).unwrap(), 0.75);
        let three_tools = vec![
            ("hammer".to_string(), vec![0.9, 0.1]),
            ("spoon".to_string(), vec![0.2, 0.6]),
            ("knife".to_string(), vec![0.3]),
        ];
        assert_relative_eq!(hand_score(&three_tools, 1).unwrap(), 0.6);
        let zeros = vec![("hammer".to_string(), vec![0.0, 0.0, 0.0])];
        assert_relative_eq!(hand_score(&zeros, 3).unwrap(), 0.0);
    }

    #[test]
    fn hand_score_names_short_tool() {
        let tools = vec![
            ("hammer".to_string(), vec![0.9, 0.8, 0.7]),
            ("spoon".to_string(), vec![0.2]),
        ];
        let err = hand_score(&tools, 3).unwrap_err();
        assert!(err.to_string().contains("spoon"), "{err}");
    }

    // ---- optimization ---------------------------------------------------

    #[test]
    fn budget_one_returns_single_trial() {
        let hand = reference_hand();
        let tool = builtin_tools().remove(0);
        let outcome = optimize_grasp(&hand, &tool, 1, 5).unwrap();
        assert_eq!(outcome.history.len(), 1);
        assert_relative_eq!(outcome.score, outcome.history[0].score);
    }

    #[test]
    fn running_best_is_non_decreasing() {
        let hand = reference_hand();
        let tool = builtin_tools().remove(0);
        let outcome = optimize_grasp(&hand, &tool, 25, 9).unwrap();
        let mut best = f64::NEG_INFINITY;
        for t in &outcome.history {
            best = best.max(t.score);
        }
        assert_relative_eq!(best, outcome.score);
        assert!(outcome.score > 0.0, "the hammer reference pose should be graspable");
    }

    #[test]
    fn tpe_beats_random_sampling_on_grasps() {
        let hand = reference_hand();
        let tool = builtin_tools().remove(0);
        let bounds = default_bounds(&hand);
        let closing = ClosingConfig::default();
        let spec = WrenchTestSpec::default();
        let space = build_grasp_space(&hand, &bounds).unwrap();
        let budget = 60;
        let mut wins = 0;
        for rep in 0..20u64 {
            let outcome = optimize_grasp(&hand, &tool, budget, rep).unwrap();
            // Paired random-search baseline: one uniform stream from the
            // same seed, same budget.
            let mut rng = ChaCha8Rng::seed_from_u64(rep);
            let mut best_random: f64 = 0.0;
            for _ in 0..budget {
                let point = space.sample_with_rng(&mut rng);
                let g = config_from_point(&hand, &tool, &point).unwrap();
                let set = close_fingers(&hand, &tool, &g, &closing).unwrap();
                let s = grasp_score(&set, &spec).unwrap().s_t;
                best_random = best_random.max(s);
            }
            if outcome.score >= best_random {
                wins += 1;
            }
        }
        assert!(wins >= 15, "TPE won only {wins}/20 paired repetitions");
    }
}
