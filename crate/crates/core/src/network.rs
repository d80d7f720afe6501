//! N-party planning: minimum spanning tree, decomposition into overlapping
//! three-party segments, per-segment rates and XOR reconciliation of the
//! segment keys into one network key.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{link_rate, optimize_intensity_links, transmittance_from_distance};
use crate::sim::KeyBits;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Party {
    pub id: PartyId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: PartyId,
    pub b: PartyId,
    pub km: f64,
}

impl Edge {
    /// Endpoints in ascending order.
    pub fn key(&self) -> (PartyId, PartyId) {
        (self.a.min(self.b), self.a.max(self.b))
    }

    fn normalized(self) -> Edge {
        let (a, b) = self.key();
        Edge { a, b, km: self.km }
    }

    pub fn other(&self, v: PartyId) -> PartyId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyGraph {
    pub parties: Vec<Party>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<Edge>>,
}

impl PartyGraph {
    pub fn from_edges(edges: &[(u32, u32, f64)]) -> Self {
        let ids: BTreeSet<u32> = edges.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        PartyGraph {
            parties: ids.into_iter().map(|id| Party { id: PartyId(id), x: None, y: None }).collect(),
            edges: Some(
                edges
                    .iter()
                    .map(|&(a, b, km)| Edge { a: PartyId(a), b: PartyId(b), km })
                    .collect(),
            ),
        }
    }

    pub fn ids(&self) -> Vec<PartyId> {
        let mut ids: Vec<_> = self.parties.iter().map(|p| p.id).collect();
        ids.sort();
        ids
    }

    /// Explicit edges, or Euclidean distances between every pair of parties.
    pub fn resolved_edges(&self) -> Result<Vec<Edge>> {
        let mut seen = BTreeSet::new();
        for p in &self.parties {
            if !seen.insert(p.id) {
                return Err(Error::Planning(format!("duplicate party id {}", p.id)));
            }
        }
        let edges = match &self.edges {
            Some(edges) => edges.clone(),
            None => {
                let mut out = Vec::new();
                for (i, p) in self.parties.iter().enumerate() {
                    for q in &self.parties[i + 1..] {
                        let (Some(px), Some(py), Some(qx), Some(qy)) = (p.x, p.y, q.x, q.y) else {
                            return Err(Error::Planning(format!(
                                "parties {} and {} need coordinates when no edges are given",
                                p.id, q.id
                            )));
                        };
                        out.push(Edge { a: p.id, b: q.id, km: (px - qx).hypot(py - qy) });
                    }
                }
                out
            }
        };
        for e in &edges {
            if !seen.contains(&e.a) || !seen.contains(&e.b) {
                return Err(Error::Planning(format!("edge {}-{} names an unknown party", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(Error::Planning(format!("self loop at party {}", e.a)));
            }
            if !(e.km > 0.0 && e.km.is_finite()) {
                return Err(Error::Planning(format!(
                    "edge {}-{} has non-positive length {}",
                    e.a, e.b, e.km
                )));
            }
        }
        Ok(edges.into_iter().map(Edge::normalized).collect())
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Spanning tree over the parties.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanningTree {
    pub vertices: Vec<PartyId>,
    pub edges: Vec<Edge>,
}

impl SpanningTree {
    pub fn total_km(&self) -> f64 {
        self.edges.iter().map(|e| e.km).sum()
    }

    pub fn distance(&self, a: PartyId, b: PartyId) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.edges.iter().find(|e| e.key() == key).map(|e| e.km)
    }

    fn adjacency(&self) -> BTreeMap<PartyId, Vec<PartyId>> {
        let mut adj: BTreeMap<PartyId, Vec<PartyId>> = self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for e in &self.edges {
            adj.get_mut(&e.a).expect("edge endpoint").push(e.b);
            adj.get_mut(&e.b).expect("edge endpoint").push(e.a);
        }
        for list in adj.values_mut() {
            list.sort();
        }
        adj
    }
}

/// Kruskal with ties broken by `(km, smaller id, larger id)`.
pub fn minimum_network(graph: &PartyGraph) -> Result<SpanningTree> {
    let ids = graph.ids();
    let index: BTreeMap<PartyId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut edges = graph.resolved_edges()?;
    edges.sort_by(|x, y| x.km.total_cmp(&y.km).then(x.key().cmp(&y.key())));

    let mut dsu = DisjointSet::new(ids.len());
    let mut tree = Vec::with_capacity(ids.len().saturating_sub(1));
    for e in edges {
        if dsu.union(index[&e.a], index[&e.b]) {
            tree.push(e);
        }
    }

    if ids.len() > 1 && tree.len() + 1 != ids.len() {
        let mut groups: BTreeMap<usize, Vec<PartyId>> = BTreeMap::new();
        for (i, &id) in ids.iter().enumerate() {
            groups.entry(dsu.find(i)).or_default().push(id);
        }
        let mut components: Vec<Vec<PartyId>> = groups.into_values().collect();
        components.sort();
        return Err(Error::Disconnected { components });
    }
    Ok(SpanningTree { vertices: ids, edges: tree })
}

/// Three parties on a tree path (center in the middle), or two for the one
/// pair segment an even party count needs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub members: Vec<PartyId>,
    pub center: PartyId,
    /// Link lengths, left member to center and center to right member.
    pub arm_distances_km: Vec<f64>,
}

impl Segment {
    pub fn is_pair(&self) -> bool {
        self.members.len() == 2
    }

    pub fn contains(&self, p: PartyId) -> bool {
        self.members.contains(&p)
    }

    fn edges(&self) -> Vec<Edge> {
        self.members
            .iter()
            .filter(|&&m| m != self.center)
            .zip(&self.arm_distances_km)
            .map(|(&m, &km)| Edge { a: m, b: self.center, km }.normalized())
            .collect()
    }
}

/// Pairs tree edges into paths of length two.
///
/// The tree is rooted at its smallest id and visited children first. At each
/// vertex the child edges not yet used are paired in id order; an unpaired one
/// joins the edge to the parent. A leftover edge at the root becomes a pair
/// segment, which happens only for an even party count.
pub fn segment_tree(tree: &SpanningTree) -> Result<Vec<Segment>> {
    if tree.vertices.len() < 2 {
        return Err(Error::Planning(format!(
            "need at least 2 parties, got {}",
            tree.vertices.len()
        )));
    }
    if tree.edges.len() + 1 != tree.vertices.len() {
        return Err(Error::Planning("input is not a spanning tree".into()));
    }
    let adj = tree.adjacency();
    let root = tree.vertices[0];

    // iterative DFS order, children before parents when reversed
    let mut parent: BTreeMap<PartyId, PartyId> = BTreeMap::new();
    let mut order = Vec::with_capacity(tree.vertices.len());
    let mut stack = vec![root];
    let mut visited = BTreeSet::from([root]);
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in adj[&v].iter().rev() {
            if visited.insert(w) {
                parent.insert(w, v);
                stack.push(w);
            }
        }
    }
    if order.len() != tree.vertices.len() {
        return Err(Error::Planning("tree is not connected".into()));
    }

    let km = |a: PartyId, b: PartyId| tree.distance(a, b).expect("tree edge");
    let mut parent_edge_used: BTreeSet<PartyId> = BTreeSet::new();
    let mut segments = Vec::new();
    for &v in order.iter().rev() {
        let open: Vec<PartyId> = adj[&v]
            .iter()
            .copied()
            .filter(|w| parent.get(w) == Some(&v) && !parent_edge_used.contains(w))
            .collect();
        for pair in open.chunks(2) {
            let (left, right) = match *pair {
                [l, r] => (l, r),
                [l] => match parent.get(&v) {
                    Some(&p) => {
                        parent_edge_used.insert(v);
                        (l, p)
                    }
                    None => {
                        segments.push(Segment {
                            members: vec![v, l],
                            center: v,
                            arm_distances_km: vec![km(v, l)],
                        });
                        continue;
                    }
                },
                _ => unreachable!(),
            };
            segments.push(Segment {
                members: vec![left, v, right],
                center: v,
                arm_distances_km: vec![km(left, v), km(v, right)],
            });
        }
    }
    Ok(segments)
}

/// How each segment picks its intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy {
    Fixed(f64),
    /// Best grid point per segment.
    Optimize(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentRate {
    pub mu: f64,
    /// Bits per pulse.
    pub rate: f64,
    /// The link of this segment with the lower rate.
    pub weakest_link: Edge,
}

/// Inter-segment XOR announcement along the segment tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentLink {
    pub parent: usize,
    pub child: usize,
    /// Party in both segments that publishes the XOR.
    pub announcer: PartyId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkPlan {
    pub tree: SpanningTree,
    pub segments: Vec<Segment>,
    pub intra_announcers: Vec<PartyId>,
    /// Parties shared by two or more segments; `m` is their count.
    pub inter_announcers: Vec<PartyId>,
    pub m: usize,
    pub root_segment: usize,
    pub segment_links: Vec<SegmentLink>,
    pub per_segment_rate: Vec<SegmentRate>,
    pub network_rate: f64,
    pub bottleneck: Edge,
    pub bottleneck_distance_km: f64,
}

impl NetworkPlan {
    /// First segment that contains `p`.
    pub fn home_segment(&self, p: PartyId) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(p))
    }

    fn parent_link(&self, child: usize) -> Option<&SegmentLink> {
        self.segment_links.iter().find(|l| l.child == child)
    }
}

fn segment_rate(seg: &Segment, policy: &MuPolicy, delta_ec: f64) -> Result<SegmentRate> {
    let edges = seg.edges();
    let etas = seg
        .arm_distances_km
        .iter()
        .map(|&km| transmittance_from_distance(km))
        .collect::<Result<Vec<_>>>()?;
    let (eta1, eta2) = (etas[0], *etas.last().expect("segment has a link"));
    let mu = match policy {
        MuPolicy::Fixed(mu) => *mu,
        MuPolicy::Optimize(grid) => optimize_intensity_links(eta1, eta2, grid, delta_ec)?.0,
    };
    let rates = etas
        .iter()
        .map(|&eta| link_rate(mu, eta, delta_ec).map(|l| l.secret_per_pulse))
        .collect::<Result<Vec<_>>>()?;
    let weakest = if rates.len() == 2 && rates[1] < rates[0] { 1 } else { 0 };
    Ok(SegmentRate {
        mu,
        rate: rates[weakest],
        weakest_link: edges[weakest],
    })
}

/// Breadth-first spanning tree of the segment overlap graph from segment 0.
fn segment_links(segments: &[Segment]) -> Vec<SegmentLink> {
    let mut links = Vec::new();
    let mut seen = vec![false; segments.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(s) = queue.pop_front() {
        for (t, other) in segments.iter().enumerate() {
            if seen[t] {
                continue;
            }
            if let Some(&shared) = segments[s].members.iter().find(|&&p| other.contains(p)) {
                seen[t] = true;
                links.push(SegmentLink { parent: s, child: t, announcer: shared });
                queue.push_back(t);
            }
        }
    }
    links
}

pub fn plan_rates(tree: &SpanningTree, segments: Vec<Segment>, policy: &MuPolicy, delta_ec: f64) -> Result<NetworkPlan> {
    if segments.is_empty() {
        return Err(Error::Planning("no segments to plan".into()));
    }
    let per_segment_rate = segments
        .par_iter()
        .map(|s| segment_rate(s, policy, delta_ec))
        .collect::<Result<Vec<_>>>()?;

    let mut worst = 0;
    for (i, r) in per_segment_rate.iter().enumerate() {
        if r.rate < per_segment_rate[worst].rate {
            worst = i;
        }
    }
    let bottleneck = per_segment_rate[worst].weakest_link;

    let mut count: BTreeMap<PartyId, usize> = BTreeMap::new();
    for s in &segments {
        for &p in &s.members {
            *count.entry(p).or_default() += 1;
        }
    }
    let inter_announcers: Vec<PartyId> = count.into_iter().filter(|&(_, c)| c > 1).map(|(p, _)| p).collect();

    Ok(NetworkPlan {
        tree: tree.clone(),
        intra_announcers: segments.iter().map(|s| s.center).collect(),
        m: inter_announcers.len(),
        inter_announcers,
        root_segment: 0,
        segment_links: segment_links(&segments),
        network_rate: per_segment_rate[worst].rate,
        per_segment_rate,
        bottleneck,
        bottleneck_distance_km: bottleneck.km,
        segments,
    })
}

/// Tree, segments and rates in one call.
pub fn plan_network(graph: &PartyGraph, policy: &MuPolicy, delta_ec: f64) -> Result<NetworkPlan> {
    let tree = minimum_network(graph)?;
    let segments = segment_tree(&tree)?;
    plan_rates(&tree, segments, policy, delta_ec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentAnnouncement {
    pub parent: usize,
    pub child: usize,
    pub announcer: PartyId,
    /// `s_parent ⊕ s_child`
    pub bits: KeyBits,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkReconciliation {
    pub global_key: KeyBits,
    pub announcements: Vec<SegmentAnnouncement>,
}

/// Truncates all segment keys to the shortest and announces XORs along the
/// segment tree. The root segment's key is the network key.
pub fn reconcile_network(segment_keys: &[KeyBits], plan: &NetworkPlan) -> Result<NetworkReconciliation> {
    if segment_keys.is_empty() {
        return Err(Error::Usage("no segment keys to reconcile".into()));
    }
    if segment_keys.len() != plan.segments.len() {
        return Err(Error::Validation(format!(
            "{} segment keys for {} segments",
            segment_keys.len(),
            plan.segments.len()
        )));
    }
    let n = segment_keys.iter().map(KeyBits::len).min().unwrap_or(0);
    let keys: Vec<KeyBits> = segment_keys.iter().map(|k| k.truncated(n)).collect();
    let announcements = plan
        .segment_links
        .iter()
        .map(|l| SegmentAnnouncement {
            parent: l.parent,
            child: l.child,
            announcer: l.announcer,
            bits: keys[l.parent].xor(&keys[l.child]),
        })
        .collect();
    Ok(NetworkReconciliation {
        global_key: keys[plan.root_segment].clone(),
        announcements,
    })
}

/// The network key as derived by a member of `segment` holding `own_key`.
pub fn derive_global_key(
    segment: usize,
    own_key: &KeyBits,
    announcements: &[SegmentAnnouncement],
    plan: &NetworkPlan,
) -> Result<KeyBits> {
    let n = announcements.first().map_or(own_key.len(), |a| a.bits.len());
    let mut key = own_key.truncated(n);
    let mut current = segment;
    let mut steps = 0;
    while current != plan.root_segment {
        let link = plan
            .parent_link(current)
            .ok_or_else(|| Error::Validation(format!("segment {current} is not linked to the root")))?;
        let ann = announcements
            .iter()
            .find(|a| a.child == current && a.parent == link.parent)
            .ok_or_else(|| Error::Validation(format!("missing announcement for segment {current}")))?;
        key = ann.bits.xor(&key);
        current = link.parent;
        steps += 1;
        if steps > plan.segments.len() {
            return Err(Error::Validation("segment links form a cycle".into()));
        }
    }
    Ok(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::ChannelParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(v: &[u32]) -> Vec<PartyId> {
        v.iter().map(|&i| PartyId(i)).collect()
    }

    fn seven_party() -> PartyGraph {
        PartyGraph::from_edges(&[(1, 3, 10.0), (2, 3, 14.0), (3, 4, 8.0), (4, 5, 9.0), (5, 6, 7.0), (5, 7, 11.0)])
    }

    fn path(n: u32, km: f64) -> PartyGraph {
        PartyGraph::from_edges(&(1..n).map(|i| (i, i + 1, km)).collect::<Vec<_>>())
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: u32) -> PartyGraph {
        let edges: Vec<_> = (2..=n)
            .map(|v| (rng.random_range(1..v), v, rng.random_range(1.0..40.0)))
            .collect();
        PartyGraph::from_edges(&edges)
    }

    fn all_spanning_tree_lengths(n: usize, edges: &[Edge]) -> Vec<f64> {
        let m = edges.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let mut dsu = DisjointSet::new(n);
            let mut ok = true;
            let mut total = 0.0;
            for (i, e) in edges.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    ok &= dsu.union(e.a.0 as usize - 1, e.b.0 as usize - 1);
                    total += e.km;
                }
            }
            if ok {
                out.push(total);
            }
        }
        out
    }

    #[test]
    fn triangle_keeps_two_shortest() {
        let g = PartyGraph::from_edges(&[(1, 2, 1.0), (2, 3, 2.0), (1, 3, 3.0)]);
        let t = minimum_network(&g).unwrap();
        let lengths: Vec<f64> = t.edges.iter().map(|e| e.km).collect();
        assert_eq!(lengths, vec![1.0, 2.0]);
    }

    #[test]
    fn path_is_its_own_tree() {
        let g = path(7, 5.0);
        let t = minimum_network(&g).unwrap();
        assert_eq!(t.edges.len(), 6);
        assert_eq!(t.total_km(), 30.0);
    }

    #[test]
    fn equal_lengths_tie_break_on_ids() {
        let g = PartyGraph::from_edges(&[(3, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let t = minimum_network(&g).unwrap();
        let keys: Vec<_> = t.edges.iter().map(Edge::key).collect();
        assert_eq!(keys, vec![(PartyId(1), PartyId(2)), (PartyId(1), PartyId(3))]);
    }

    #[test]
    fn euclidean_distances_from_coordinates() {
        let g: PartyGraph = serde_json::from_str(
            r#"{"parties":[{"id":1,"x":0,"y":0},{"id":2,"x":3,"y":4},{"id":3,"x":6,"y":8}]}"#,
        )
        .unwrap();
        let t = minimum_network(&g).unwrap();
        assert_eq!(t.total_km(), 10.0);
        let missing: PartyGraph = serde_json::from_str(r#"{"parties":[{"id":1,"x":0},{"id":2,"x":3,"y":4}]}"#).unwrap();
        assert!(matches!(minimum_network(&missing), Err(Error::Planning(_))));
    }

    #[test]
    fn disconnected_lists_components() {
        let g = PartyGraph::from_edges(&[(1, 2, 1.0), (3, 4, 1.0), (4, 5, 2.0)]);
        match minimum_network(&g) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components, vec![ids(&[1, 2]), ids(&[3, 4, 5])]);
                let msg = Error::Disconnected { components }.to_string();
                assert!(msg.contains("{1,2}") && msg.contains("{3,4,5}"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(minimum_network(&PartyGraph::from_edges(&[(1, 2, 0.0)])).is_err());
        assert!(minimum_network(&PartyGraph::from_edges(&[(1, 2, -3.0)])).is_err());
        let mut dup = PartyGraph::from_edges(&[(1, 2, 1.0)]);
        dup.parties.push(Party { id: PartyId(1), x: None, y: None });
        assert!(minimum_network(&dup).is_err());
    }

    #[test]
    fn mst_is_minimal_on_small_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(3..=6u32);
            let mut edges = Vec::new();
            // a random spanning path guarantees connectivity, extra edges give choice
            for v in 2..=n {
                edges.push((rng.random_range(1..v), v, rng.random_range(1.0..20.0)));
            }
            for a in 1..=n {
                for b in a + 1..=n {
                    if !edges.iter().any(|&(x, y, _)| (x.min(y), x.max(y)) == (a, b)) && rng.random_bool(0.5) {
                        edges.push((a, b, rng.random_range(1.0..20.0)));
                    }
                }
            }
            let g = PartyGraph::from_edges(&edges);
            let t = minimum_network(&g).unwrap();
            let best = all_spanning_tree_lengths(n as usize, &g.resolved_edges().unwrap())
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!((t.total_km() - best).abs() < 1e-9, "{} vs {best}", t.total_km());
        }
    }

    #[test]
    fn seven_party_segments() {
        let t = minimum_network(&seven_party()).unwrap();
        let segs = segment_tree(&t).unwrap();
        assert_eq!(segs.len(), 3);
        let mut centers: Vec<_> = segs.iter().map(|s| s.center).collect();
        centers.sort();
        assert_eq!(centers, ids(&[3, 4, 5]));
        let mut members: Vec<Vec<PartyId>> = segs
            .iter()
            .map(|s| {
                let mut m = s.members.clone();
                m.sort();
                m
            })
            .collect();
        members.sort();
        assert_eq!(members, vec![ids(&[1, 2, 3]), ids(&[3, 4, 5]), ids(&[5, 6, 7])]);
    }

    #[test]
    fn path_segments() {
        let segs = segment_tree(&minimum_network(&path(7, 1.0)).unwrap()).unwrap();
        let mut centers: Vec<_> = segs.iter().map(|s| s.center).collect();
        centers.sort();
        assert_eq!(centers, ids(&[2, 4, 6]));
        let plan = plan_rates(&minimum_network(&path(7, 1.0)).unwrap(), segs, &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert_eq!(plan.inter_announcers, ids(&[3, 5]));
        assert_eq!(plan.m, 2);
    }

    #[test]
    fn small_networks() {
        let three = segment_tree(&minimum_network(&path(3, 2.0)).unwrap()).unwrap();
        assert_eq!(three.len(), 1);
        assert_eq!(three[0].center, PartyId(2));
        let two = segment_tree(&minimum_network(&path(2, 2.0)).unwrap()).unwrap();
        assert_eq!(two.len(), 1);
        assert!(two[0].is_pair());
        let one = PartyGraph { parties: vec![Party { id: PartyId(1), x: None, y: None }], edges: Some(vec![]) };
        assert!(matches!(segment_tree(&minimum_network(&one).unwrap()), Err(Error::Planning(_))));
    }

    #[test]
    fn star_has_one_inter_announcer() {
        let g = PartyGraph::from_edges(&(2..=7).map(|i| (1, i, 5.0)).collect::<Vec<_>>());
        let plan = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert_eq!(plan.segments.len(), 3);
        assert_eq!(plan.inter_announcers, ids(&[1]));
        assert_eq!(plan.m, 1);
    }

    #[test]
    fn identical_segments_share_the_rate() {
        let plan = plan_network(&path(7, 20.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        let want = crate::keyrate::asymptotic_rate(&ChannelParams::from_link_km(0.2, 0.2, 20.0, 20.0).unwrap(), 0.0)
            .unwrap()
            .r_infinity;
        for r in &plan.per_segment_rate {
            assert!((r.rate - want).abs() < 1e-15);
        }
        assert!((plan.network_rate - want).abs() < 1e-15);
    }

    #[test]
    fn stretched_edge_is_the_bottleneck() {
        let g = PartyGraph::from_edges(&[(1, 2, 10.0), (2, 3, 10.0), (3, 4, 60.0), (4, 5, 10.0)]);
        let plan = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert_eq!(plan.bottleneck.key(), (PartyId(3), PartyId(4)));
        assert_eq!(plan.bottleneck_distance_km, 60.0);

        let stretched = PartyGraph::from_edges(&[(1, 2, 30.0), (2, 3, 10.0), (3, 4, 60.0), (4, 5, 10.0)]);
        let again = plan_network(&stretched, &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert_eq!(again.network_rate, plan.network_rate);
    }

    #[test]
    fn optimized_policy_picks_from_grid() {
        let g = path(5, 40.0);
        let grid = vec![0.05, 0.1, 0.2, 0.4];
        let plan = plan_network(&g, &MuPolicy::Optimize(grid.clone()), 0.0).unwrap();
        let fixed = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert!(plan.per_segment_rate.iter().all(|r| grid.contains(&r.mu)));
        assert!(plan.network_rate >= fixed.network_rate);
    }

    #[test]
    fn diameter_does_not_set_the_rate() {
        let short = plan_network(&path(3, 25.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        let long = plan_network(&path(9, 25.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        assert_eq!(short.network_rate, long.network_rate);
    }

    #[test]
    fn reconcile_examples() {
        let plan = plan_network(&path(5, 10.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        let s1: KeyBits = "1011".parse().unwrap();
        let s2: KeyBits = "0110".parse().unwrap();
        let rec = reconcile_network(&[s1.clone(), s2.clone()], &plan).unwrap();
        assert_eq!(rec.announcements.len(), 1);
        assert_eq!(rec.announcements[0].bits.to_string(), "1101");
        assert_eq!(rec.global_key, s1);
        assert_eq!(derive_global_key(1, &s2, &rec.announcements, &plan).unwrap(), s1);

        let single = plan_network(&path(3, 10.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        let rec = reconcile_network(&[s2.clone()], &single).unwrap();
        assert!(rec.announcements.is_empty());
        assert_eq!(rec.global_key, s2);

        assert!(matches!(reconcile_network(&[], &single), Err(Error::Usage(_))));
        assert!(reconcile_network(&[s1, s2], &single).is_err());
    }

    #[test]
    fn chained_segments_truncate_and_converge() {
        let plan = plan_network(&path(7, 10.0), &MuPolicy::Fixed(0.2), 0.0).unwrap();
        let keys: Vec<KeyBits> = ["110010", "0111", "10101"].iter().map(|s| s.parse().unwrap()).collect();
        let rec = reconcile_network(&keys, &plan).unwrap();
        assert_eq!(rec.announcements.len(), 2);
        assert_eq!(rec.global_key.len(), 4);
        for (i, k) in keys.iter().enumerate() {
            assert_eq!(derive_global_key(i, k, &rec.announcements, &plan).unwrap(), rec.global_key);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn plans_cover_and_reconcile(seed in any::<u64>(), n in 2u32..=9, len in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_tree(&mut rng, n);
            let plan = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0).unwrap();

            let covered: BTreeSet<PartyId> = plan.segments.iter().flat_map(|s| s.members.clone()).collect();
            prop_assert_eq!(covered.into_iter().collect::<Vec<_>>(), g.ids());
            if n % 2 == 1 {
                prop_assert_eq!(2 * plan.segments.len() + 1, n as usize);
                prop_assert!(plan.segments.iter().all(|s| !s.is_pair()));
            } else {
                prop_assert_eq!(plan.segments.iter().filter(|s| s.is_pair()).count(), 1);
            }
            for s in &plan.segments {
                for (m, &km) in s.members.iter().filter(|&&m| m != s.center).zip(&s.arm_distances_km) {
                    prop_assert_eq!(plan.tree.distance(*m, s.center), Some(km));
                }
            }
            for (i, a) in plan.segments.iter().enumerate() {
                for b in &plan.segments[i + 1..] {
                    prop_assert!(a.members.iter().filter(|&&p| b.contains(p)).count() <= 1);
                }
            }
            prop_assert_eq!(plan.segment_links.len(), plan.segments.len() - 1);

            let keys: Vec<KeyBits> = plan
                .segments
                .iter()
                .map(|_| KeyBits::new((0..len + rng.random_range(0..4)).map(|_| rng.random()).collect()))
                .collect();
            let rec = reconcile_network(&keys, &plan).unwrap();
            for party in g.ids() {
                let home = plan.home_segment(party).unwrap();
                let derived = derive_global_key(home, &keys[home], &rec.announcements, &plan).unwrap();
                prop_assert_eq!(&derived, &rec.global_key);
            }
        }

        #[test]
        fn rate_depends_only_on_segment_distances(seed in any::<u64>(), n in 3u32..=9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_tree(&mut rng, n);
            let mut labels: Vec<u32> = (1..=n).collect();
            for i in (1..labels.len()).rev() {
                labels.swap(i, rng.random_range(0..=i));
            }
            let edges: Vec<_> = g.edges.as_ref().unwrap().iter()
                .map(|e| (labels[e.a.0 as usize - 1], labels[e.b.0 as usize - 1], e.km))
                .collect();
            let a = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0).unwrap();
            let b = plan_network(&PartyGraph::from_edges(&edges), &MuPolicy::Fixed(0.2), 0.0).unwrap();
            prop_assert_eq!(a.network_rate, rate_from_distances(&a));
            prop_assert_eq!(b.network_rate, rate_from_distances(&b));
            if segment_distances(&a) == segment_distances(&b) {
                prop_assert_eq!(a.network_rate, b.network_rate);
            }
        }
    }

    fn segment_distances(p: &NetworkPlan) -> Vec<Vec<u64>> {
        let mut v: Vec<Vec<u64>> = p
            .segments
            .iter()
            .map(|s| {
                let mut d: Vec<u64> = s.arm_distances_km.iter().map(|x| x.to_bits()).collect();
                d.sort();
                d
            })
            .collect();
        v.sort();
        v
    }

    fn rate_from_distances(p: &NetworkPlan) -> f64 {
        p.segments
            .iter()
            .flat_map(|s| s.arm_distances_km.iter())
            .map(|&km| link_rate(0.2, transmittance_from_distance(km).unwrap(), 0.0).unwrap().secret_per_pulse)
            .fold(f64::INFINITY, f64::min)
    }
}
