//! Proximal operators for the forest penalty and the l1 baseline.
//!
//! The penalty is a sum of l2 norms over nested groups (each node of the
//! forest together with its descendants). Its exact proximal operator is
//! the composition of per-group block thresholding steps applied
//! descendants-before-ancestors; [`ProxPlan`] precomputes that order and
//! the group member lists so the inner training loop does no traversal.

use crate::error::{Error, Result};
use crate::forest::Forest;

/// Group norms below this are treated as zero so scaling never divides
/// by a denormal.
const NORM_EPS: f64 = 1e-15;

/// Precomputed application order and group membership for a forest.
///
/// Nodes are processed in non-increasing depth so every descendant of a
/// node is thresholded before the node itself; groups from different
/// trees never overlap.
#[derive(Debug, Clone)]
pub struct ProxPlan {
    m: usize,
    order: Vec<u32>,
    /// Flattened member lists (node itself first, then its descendants
    /// in preorder), indexed by `group_ptr`.
    group_members: Vec<u32>,
    group_ptr: Vec<u32>,
    depth: Vec<u32>,
}

impl ProxPlan {
    pub fn new(forest: &Forest) -> Self {
        let m = forest.len();
        let mut order: Vec<u32> = (0..m as u32).collect();
        order.sort_by_key(|&n| std::cmp::Reverse(forest.depth_of(n as usize)));

        let mut group_members = Vec::new();
        let mut group_ptr = Vec::with_capacity(m + 1);
        group_ptr.push(0u32);
        for node in 0..m {
            group_members.push(node as u32);
            group_members
                .extend(forest.descendants(node).expect("node in range"));
            group_ptr.push(group_members.len() as u32);
        }

        ProxPlan {
            m,
            order,
            group_members,
            group_ptr,
            depth: (0..m).map(|n| forest.depth_of(n)).collect(),
        }
    }

    /// Number of latent dimensions M.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Node processing order (descendants before ancestors).
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Members of `node`'s group: the node itself plus its descendants.
    pub fn group(&self, node: usize) -> &[u32] {
        let lo = self.group_ptr[node] as usize;
        let hi = self.group_ptr[node + 1] as usize;
        &self.group_members[lo..hi]
    }

    pub fn depth_of(&self, node: usize) -> u32 {
        self.depth[node]
    }

    /// Penalty value over the precomputed groups; same quantity as
    /// [`Forest::omega`] without the per-call traversal.
    pub fn omega(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.m);
        let mut total = 0.0;
        for node in 0..self.m {
            let mut sq = 0.0;
            for &i in self.group(node) {
                let x = a[i as usize];
                sq += x * x;
            }
            total += sq.sqrt();
        }
        total
    }
}

/// Soft threshold of a single coordinate.
///
/// This is also what [`group_threshold`] does on a singleton group; both
/// paths use the same arithmetic so the flat forest and the dedicated l1
/// route produce bit-identical results.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    let r = x.abs();
    if r <= t {
        0.0
    } else {
        (r - t).copysign(x)
    }
}

/// Block soft thresholding of the coordinates in `group`: zero the block
/// if its l2 norm is at most `t`, otherwise shrink it radially by
/// `1 - t / norm`. Coordinates outside the group are untouched.
pub fn group_threshold(a: &mut [f64], group: &[u32], t: f64) {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return;
    }
    if let [i] = group {
        let i = *i as usize;
        a[i] = soft_threshold(a[i], t);
        return;
    }
    let mut sq = 0.0;
    for &i in group {
        let x = a[i as usize];
        sq += x * x;
    }
    let r = sq.sqrt();
    if r <= t || r < NORM_EPS {
        for &i in group {
            a[i as usize] = 0.0;
        }
    } else {
        let scale = 1.0 - t / r;
        for &i in group {
            a[i as usize] *= scale;
        }
    }
}

/// Exact proximal operator of `t * omega`: applies the per-node block
/// threshold in plan order, which minimizes `0.5 * ||u - a||^2 + t * omega(u)`.
pub fn forest_prox(plan: &ProxPlan, a: &mut [f64], t: f64) -> Result<()> {
    if a.len() != plan.len() {
        return Err(Error::validation(format!(
            "vector length {} does not match M = {}",
            a.len(),
            plan.len()
        )));
    }
    for &node in plan.order() {
        group_threshold(a, plan.group(node as usize), t);
    }
    Ok(())
}

/// Coordinate-wise soft thresholding, the proximal operator of `t * l1`.
/// Equivalent to [`forest_prox`] over the all-singleton forest; exposed
/// separately for the plain sparse-coding baseline.
pub fn l1_prox(a: &mut [f64], t: f64) {
    if t == 0.0 {
        return;
    }
    for x in a.iter_mut() {
        *x = soft_threshold(*x, t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn prox_on(forest: &Forest, a: &[f64], t: f64) -> Vec<f64> {
        let plan = ProxPlan::new(forest);
        let mut u = a.to_vec();
        forest_prox(&plan, &mut u, t).unwrap();
        u
    }

    #[test]
    fn plan_orders_descendants_first() {
        let forest = Forest::default_forest(2).unwrap();
        let plan = ProxPlan::new(&forest);
        let pos: Vec<usize> = (0..plan.len())
            .map(|n| plan.order().iter().position(|&o| o as usize == n).unwrap())
            .collect();
        for node in 0..plan.len() {
            for &d in &plan.group(node)[1..] {
                assert!(pos[d as usize] < pos[node], "descendant {d} after {node}");
            }
        }
    }

    #[test]
    fn group_threshold_scales() {
        let mut a = [3.0, 4.0];
        group_threshold(&mut a, &[0, 1], 1.0);
        assert_relative_eq!(a[0], 2.4, max_relative = 1e-15);
        assert_relative_eq!(a[1], 3.2, max_relative = 1e-15);
    }

    #[test]
    fn group_threshold_zeroes_small_block() {
        let mut a = [0.3, 0.4];
        group_threshold(&mut a, &[0, 1], 1.0);
        assert_eq!(a, [0.0, 0.0]);
    }

    #[test]
    fn group_threshold_zero_t_is_identity() {
        let mut a = [0.3, -0.4, 1e-300];
        group_threshold(&mut a, &[0, 1, 2], 0.0);
        assert_eq!(a, [0.3, -0.4, 1e-300]);
    }

    #[test]
    fn chain_prox_hand_value() {
        // Chain 0 <- 1: leaf step soft-thresholds a[1], root step scales
        // the whole vector; hand value 3 - 1/sqrt(2).
        let forest = Forest::parse("-1 0").unwrap();
        let u = prox_on(&forest, &[3.0, 4.0], 1.0);
        let expect = 3.0 - 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(u[0], expect, epsilon = 1e-12);
        assert_relative_eq!(u[1], expect, epsilon = 1e-12);
    }

    #[test]
    fn zero_is_fixed_point() {
        let forest = Forest::default_forest(1).unwrap();
        let u = prox_on(&forest, &vec![0.0; 13], 2.5);
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn flat_forest_is_soft_thresholding() {
        let forest = Forest::flat(2).unwrap();
        let u = prox_on(&forest, &[3.0, -0.5], 1.0);
        assert_eq!(u, vec![2.0, 0.0]);
    }

    #[test]
    fn l1_prox_matches_spec_example() {
        let mut a = [3.0, -0.5];
        l1_prox(&mut a, 1.0);
        assert_eq!(a, [2.0, 0.0]);
        let mut b = [3.0, -0.5];
        l1_prox(&mut b, 0.0);
        assert_eq!(b, [3.0, -0.5]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let plan = ProxPlan::new(&Forest::flat(3).unwrap());
        let mut a = [1.0];
        assert!(forest_prox(&plan, &mut a, 1.0).is_err());
    }

    proptest! {
        // The l1 route and the flat-forest route must agree bitwise: the
        // trainer relies on this to make the SC baseline reproducible
        // through either code path.
        #[test]
        fn l1_equals_flat_forest_bitwise(
            a in proptest::collection::vec(-10.0f64..10.0, 1..40),
            t in 0.0f64..3.0,
        ) {
            let forest = Forest::flat(a.len()).unwrap();
            let via_forest = prox_on(&forest, &a, t);
            let mut via_l1 = a.clone();
            l1_prox(&mut via_l1, t);
            for (x, y) in via_forest.iter().zip(via_l1.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        // prox is non-expansive in l2.
        #[test]
        fn non_expansive(
            pair in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 13),
            t in 0.0f64..2.0,
        ) {
            let forest = Forest::default_forest(1).unwrap();
            let a: Vec<f64> = pair.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pair.iter().map(|p| p.1).collect();
            let ua = prox_on(&forest, &a, t);
            let ub = prox_on(&forest, &b, t);
            let dist =
                |x: &[f64], y: &[f64]| -> f64 {
                    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
                };
            prop_assert!(dist(&ua, &ub) <= dist(&a, &b) + 1e-12);
        }

        // Zero patterns are rooted: a zeroed node implies zeroed descendants.
        #[test]
        fn rooted_zero_pattern(
            a in proptest::collection::vec(0.05f64..3.0, 26),
            signs in proptest::collection::vec(prop_oneof![Just(1.0), Just(-1.0)], 26),
            t in 0.0f64..1.5,
        ) {
            let forest = Forest::default_forest(2).unwrap();
            let signed: Vec<f64> = a.iter().zip(&signs).map(|(x, s)| x * s).collect();
            let u = prox_on(&forest, &signed, t);
            for node in 0..26 {
                if u[node] == 0.0 {
                    for d in forest.descendants(node).unwrap() {
                        prop_assert_eq!(u[d as usize], 0.0);
                    }
                }
            }
        }
    }
}
