//! AWGN multiple-access channel models and rate/noise bookkeeping.
//!
//! Covers the coordinated single-cell GMAC (y = sum_k x_k + z), the
//! bipartite cell-free model with per-AP observations, the Eb/N0 to sigma^2
//! conversion, and the sum-rate / sum-capacity arithmetic used by the
//! experiment harness.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Noise variance from Eb/N0 in dB.
///
/// Per-user transmit energy is E|x|^2 = L (unit-variance columns), so the
/// energy per information bit is L/B_bits, and N0 = 2 sigma^2 for real AWGN:
/// sigma^2 = L / (2 B_bits 10^(dB/10)).
pub fn ebn0_to_sigma2(ebn0_db: f64, codeword_sections: usize, info_bits: usize) -> f64 {
    assert!(info_bits >= 1);
    codeword_sections as f64 / (2.0 * info_bits as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Upper bound on the sum capacity in bits per real channel use:
/// C_sum = 1/2 log2(1 + L/(n sigma^2)).
pub fn sum_capacity_bound(codeword_sections: usize, channel_uses: usize, sigma2: f64) -> f64 {
    0.5 * (1.0 + codeword_sections as f64 / (channel_uses as f64 * sigma2)).log2()
}

/// R_sum = K * B_bits / n_K.
pub fn sum_rate(users: usize, info_bits: usize, channel_uses: usize) -> f64 {
    (users * info_bits) as f64 / channel_uses as f64
}

/// Smallest integer channel-use count achieving at most the target sum rate.
pub fn channel_uses_for(users: usize, info_bits: usize, target_sum_rate: f64) -> usize {
    assert!(target_sum_rate > 0.0);
    ((users * info_bits) as f64 / target_sum_rate).ceil() as usize
}

/// Per-sample noise variance, with optional per-AP overrides for cell-free
/// experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_ap: Option<Vec<f64>>,
}

impl NoiseSpec {
    pub fn new(sigma2: f64) -> Self {
        assert!(sigma2 >= 0.0);
        Self { sigma2, per_ap: None }
    }

    pub fn for_ap(&self, ap: usize) -> f64 {
        self.per_ap.as_ref().map_or(self.sigma2, |v| v[ap])
    }
}

/// Single-cell GMAC: y = sum_k x_k + z with z ~ N(0, sigma^2 I).
/// Signals are summed in user order for reproducibility.
pub fn gmac_transmit<R: Rng>(signals: &[Vec<f64>], sigma2: f64, rng: &mut R) -> Vec<f64> {
    let n = signals.first().map_or(0, Vec::len);
    assert!(signals.iter().all(|s| s.len() == n), "signal length mismatch");
    let mut y = vec![0.0; n];
    for s in signals {
        for (acc, &x) in y.iter_mut().zip(s) {
            *acc += x;
        }
    }
    add_noise(&mut y, sigma2, rng);
    y
}

fn add_noise<R: Rng>(y: &mut [f64], sigma2: f64, rng: &mut R) {
    if sigma2 == 0.0 {
        return;
    }
    let sd = sigma2.sqrt();
    for v in y.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *v += sd * g;
    }
}

/// Topology errors surface both construction and JSON-load problems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyError {
    EdgeOutOfRange { ap: usize, user: usize },
    DisconnectedUser(usize),
    IdleAp(usize),
    DuplicateEdge { ap: usize, user: usize },
    Parse(String),
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::EdgeOutOfRange { ap, user } => {
                write!(f, "edge ({ap}, {user}) outside declared dimensions")
            }
            TopologyError::DisconnectedUser(k) => {
                write!(f, "user {k} is not connected to any access point")
            }
            TopologyError::IdleAp(b) => write!(f, "access point {b} hears no users"),
            TopologyError::DuplicateEdge { ap, user } => {
                write!(f, "edge ({ap}, {user}) appears twice")
            }
            TopologyError::Parse(msg) => write!(f, "topology file: {msg}"),
        }
    }
}

impl std::error::Error for TopologyError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    aps: usize,
    users: usize,
    edges: Vec<(usize, usize)>,
}

/// Bipartite user/access-point adjacency for the cell-free model.
///
/// Invariants: every user hears at least one AP, every AP hears at least
/// one user, and the two adjacency views are mutually consistent.
/// Serialization round-trips through the topology-file schema, so loading
/// always re-validates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    num_aps: usize,
    num_users: usize,
    users_of_ap: Vec<Vec<usize>>,
    aps_of_user: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(
        num_aps: usize,
        num_users: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, TopologyError> {
        let mut users_of_ap: Vec<Vec<usize>> = vec![Vec::new(); num_aps];
        let mut aps_of_user: Vec<Vec<usize>> = vec![Vec::new(); num_users];
        for &(b, k) in edges {
            if b >= num_aps || k >= num_users {
                return Err(TopologyError::EdgeOutOfRange { ap: b, user: k });
            }
            if users_of_ap[b].contains(&k) {
                return Err(TopologyError::DuplicateEdge { ap: b, user: k });
            }
            users_of_ap[b].push(k);
            aps_of_user[k].push(b);
        }
        for (k, aps) in aps_of_user.iter().enumerate() {
            if aps.is_empty() {
                return Err(TopologyError::DisconnectedUser(k));
            }
        }
        for (b, users) in users_of_ap.iter().enumerate() {
            if users.is_empty() {
                return Err(TopologyError::IdleAp(b));
            }
        }
        for list in users_of_ap.iter_mut().chain(aps_of_user.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self { num_aps, num_users, users_of_ap, aps_of_user })
    }

    /// One AP hearing every user: the single-cell reduction.
    pub fn single_cell(num_users: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..num_users).map(|k| (0, k)).collect();
        Self::new(1, num_users, &edges).expect("single-cell topology is always valid")
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// K_b: users heard by access point b, ascending.
    pub fn users_of_ap(&self, b: usize) -> &[usize] {
        &self.users_of_ap[b]
    }

    /// B_k: access points hearing user k, ascending.
    pub fn aps_of_user(&self, k: usize) -> &[usize] {
        &self.aps_of_user[k]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (b, users) in self.users_of_ap.iter().enumerate() {
            for &k in users {
                out.push((b, k));
            }
        }
        out
    }

    /// Loads the JSON object {"aps": B, "users": K, "edges": [[b,k],...]}
    /// and validates the invariants.
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let raw: TopologyFile =
            serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Self::new(raw.aps, raw.users, &raw.edges)
    }

    pub fn to_json(&self) -> String {
        let raw = TopologyFile {
            aps: self.num_aps,
            users: self.num_users,
            edges: self.edges(),
        };
        serde_json::to_string_pretty(&raw).expect("topology serializes")
    }
}

impl Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TopologyFile { aps: self.num_aps, users: self.num_users, edges: self.edges() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = TopologyFile::deserialize(deserializer)?;
        Topology::new(raw.aps, raw.users, &raw.edges).map_err(serde::de::Error::custom)
    }
}

/// Cell-free transmission: y_b = sum_{k in K_b} x_k + z_b with independent
/// noise per AP, drawn in AP order from the supplied stream.
pub fn cellfree_transmit<R: Rng>(
    topology: &Topology,
    signals: &[Vec<f64>],
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    assert_eq!(signals.len(), topology.num_users(), "one signal per user");
    let n = signals.first().map_or(0, Vec::len);
    assert!(signals.iter().all(|s| s.len() == n), "signal length mismatch");
    (0..topology.num_aps())
        .map(|b| {
            let mut y = vec![0.0; n];
            for &k in topology.users_of_ap(b) {
                for (acc, &x) in y.iter_mut().zip(&signals[k]) {
                    *acc += x;
                }
            }
            add_noise(&mut y, noise.for_ap(b), rng);
            y
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn ebn0_conversion_hits_the_trivial_point() {
        // L = 2*B at 0 dB gives sigma^2 = 1
        assert!((ebn0_to_sigma2(0.0, 16, 8) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ebn0_conversion_matches_closed_form_at_operating_point() {
        let s2 = ebn0_to_sigma2(2.25, 766, 5888);
        assert!((s2 - 0.038746).abs() < 1e-5, "sigma2 {s2}");
    }

    #[test]
    fn ebn0_conversion_is_monotone() {
        let mut prev = f64::INFINITY;
        for db10 in -20..40 {
            let s2 = ebn0_to_sigma2(db10 as f64 / 10.0, 766, 5888);
            assert!(s2 < prev);
            prev = s2;
        }
    }

    #[test]
    fn capacity_bound_reproduces_reference_line() {
        let sigma2 = ebn0_to_sigma2(2.25, 766, 5888);
        let c = sum_capacity_bound(766, 7350, sigma2);
        assert!((c - 0.941760).abs() < 1e-4, "C_sum {c}");
    }

    #[test]
    fn capacity_bound_limits() {
        // L/(n sigma^2) = 1 -> 1/2
        assert!((sum_capacity_bound(100, 100, 1.0) - 0.5).abs() < 1e-12);
        assert!(sum_capacity_bound(100, 100, 1e12) < 1e-10);
    }

    #[test]
    fn sum_rate_arithmetic() {
        assert!((sum_rate(1, 5888, 7350) - 0.8011).abs() < 1e-4);
        assert!((sum_rate(2, 5888, 14720) - 0.8).abs() < 1e-12);
        assert_eq!(channel_uses_for(8, 5888, 0.82), 57444);
        assert_eq!(channel_uses_for(4, 224, 0.8), 1120);
    }

    #[test]
    fn noiseless_single_user_passthrough() {
        let x = vec![1.0, -2.0, 3.5];
        let mut rng = seeding::stream(0, &[]);
        let y = gmac_transmit(&[x.clone()], 0.0, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn superposition_cancels_opposite_signals() {
        let x0 = vec![1.0, -2.0, 3.5];
        let x1: Vec<f64> = x0.iter().map(|v| -v).collect();
        let mut rng = seeding::stream(0, &[]);
        let y = gmac_transmit(&[x0, x1], 0.0, &mut rng);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_variance_matches_spec() {
        let zeros = vec![vec![0.0; 100_000]];
        let mut rng = seeding::stream(1234, &[]);
        let y = gmac_transmit(&zeros, 0.25, &mut rng);
        let var: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var - 0.25).abs() < 0.01, "empirical variance {var}");
    }

    #[test]
    fn noise_is_reproducible_per_stream() {
        let zeros = vec![vec![0.0; 64]];
        let a = gmac_transmit(&zeros, 1.0, &mut seeding::stream(7, &[seeding::tag::NOISE, 3]));
        let b = gmac_transmit(&zeros, 1.0, &mut seeding::stream(7, &[seeding::tag::NOISE, 3]));
        assert_eq!(a, b);
    }

    #[test]
    fn topology_invariants_are_enforced() {
        assert!(matches!(
            Topology::new(2, 3, &[(0, 0), (1, 1)]),
            Err(TopologyError::DisconnectedUser(2))
        ));
        assert!(matches!(
            Topology::new(2, 2, &[(0, 0), (0, 1)]),
            Err(TopologyError::IdleAp(1))
        ));
        assert!(matches!(
            Topology::new(1, 1, &[(0, 0), (0, 0)]),
            Err(TopologyError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            Topology::new(1, 1, &[(0, 1)]),
            Err(TopologyError::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn adjacency_views_are_consistent() {
        let t = Topology::new(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        for b in 0..2 {
            for &k in t.users_of_ap(b) {
                assert!(t.aps_of_user(k).contains(&b));
            }
        }
        assert_eq!(t.users_of_ap(0), &[0, 1]);
        assert_eq!(t.users_of_ap(1), &[1, 2]);
        assert_eq!(t.aps_of_user(1), &[0, 1]);
    }

    #[test]
    fn fig4_style_topology_routes_signals_correctly() {
        let t = Topology::new(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        let signals = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![4.0, 4.0]];
        let mut rng = seeding::stream(0, &[]);
        let ys = cellfree_transmit(&t, &signals, &NoiseSpec::new(0.0), &mut rng);
        // AP 0 hears users {0,1}: no contribution from user 2
        assert_eq!(ys[0], vec![1.0, 1.0]);
        // AP 1 hears users {1,2}: no contribution from user 0
        assert_eq!(ys[1], vec![4.0, 5.0]);
    }

    #[test]
    fn single_ap_hearing_everyone_reduces_to_gmac() {
        let t = Topology::single_cell(3);
        let signals = vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![-0.25, 0.125]];
        let sigma2 = 0.49;
        let ys = cellfree_transmit(
            &t,
            &signals,
            &NoiseSpec::new(sigma2),
            &mut seeding::stream(5, &[]),
        );
        let y = gmac_transmit(&signals, sigma2, &mut seeding::stream(5, &[]));
        assert_eq!(ys.len(), 1);
        assert_eq!(ys[0], y);
    }

    #[test]
    fn topology_json_round_trip_and_validation() {
        let t = Topology::new(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        let parsed = Topology::from_json(&t.to_json()).unwrap();
        assert_eq!(parsed, t);
        assert!(matches!(Topology::from_json("{"), Err(TopologyError::Parse(_))));
        let bad = r#"{"aps": 1, "users": 2, "edges": [[0, 0]]}"#;
        assert!(matches!(Topology::from_json(bad), Err(TopologyError::DisconnectedUser(1))));
    }
}
