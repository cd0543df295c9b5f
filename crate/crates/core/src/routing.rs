//! Shortest-path routing (SPR) and cooperative multi-path routing (CMR).
//!
//! Hubs form a mesh whose edge weights are ETX values, `1 / (1 - O_p)`, with
//! `O_p` the fraction of a window's SINR samples below the ETX threshold.
//! SPR takes the cheapest two-hop path (falling back to the direct link when
//! no two-hop path exists) and its end-to-end SINR is the weaker hop.
//!
//! CMR uses that path plus a second one that avoids the first path's
//! intermediate hub. Each route-hop is a 3-branch selection combiner: the
//! direct hub link and two decode-and-forward branches through on-body
//! relays, each bottlenecked by its weaker link-hop. A path is as good as its
//! weakest route-hop and CMR keeps the better path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scenario::{NodeId, PathPicker, RelaySide, Topology};
use crate::sinr::SinrSample;
use crate::window::WindowLinks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("no SINR samples")]
    EmptySamples,
    #[error("outage probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("no route from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId },
    #[error("source and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("hub {0} is not in the graph")]
    UnknownHub(NodeId),
    #[error("every selection-combining branch is absent")]
    AllBranchesAbsent,
}

/// Fraction of samples strictly below `gamma_th_db`.
pub fn link_outage(samples: &[SinrSample], gamma_th_db: f64) -> Result<f64, RoutingError> {
    if samples.is_empty() {
        return Err(RoutingError::EmptySamples);
    }
    let below = samples.iter().filter(|s| s.sinr_db < gamma_th_db).count();
    Ok(below as f64 / samples.len() as f64)
}

pub(crate) fn link_outage_db(samples_db: &[f64], gamma_th_db: f64) -> f64 {
    samples_db.iter().filter(|&&s| s < gamma_th_db).count() as f64 / samples_db.len() as f64
}

/// Expected transmission count. A link in permanent outage gets `+inf`,
/// meaning absent.
pub fn etx(outage: f64) -> Result<f64, RoutingError> {
    if !(0.0..=1.0).contains(&outage) {
        return Err(RoutingError::OutOfRange(outage));
    }
    Ok(if outage == 1.0 { f64::INFINITY } else { 1.0 / (1.0 - outage) })
}

/// Directed hub mesh weighted by link ETX.
#[derive(Debug, Clone, PartialEq)]
pub struct HubGraph {
    hubs: Vec<NodeId>,
    etx: BTreeMap<(NodeId, NodeId), f64>,
}

impl HubGraph {
    pub fn new(mut hubs: Vec<NodeId>) -> Self {
        hubs.sort();
        hubs.dedup();
        Self { hubs, etx: BTreeMap::new() }
    }

    /// Graph over `hubs` with every directed hub link weighted from `links`.
    pub fn from_window(hubs: Vec<NodeId>, links: &WindowLinks) -> Self {
        let mut g = Self::new(hubs);
        for i in 0..g.hubs.len() {
            for j in 0..g.hubs.len() {
                if i != j {
                    let (a, b) = (g.hubs[i], g.hubs[j]);
                    let w = etx(links.get(a, b).outage).expect("outage is a fraction");
                    g.set_etx(a, b, w);
                }
            }
        }
        g
    }

    pub fn hubs(&self) -> &[NodeId] {
        &self.hubs
    }

    pub fn set_etx(&mut self, from: NodeId, to: NodeId, etx: f64) {
        self.etx.insert((from, to), etx);
    }

    pub fn set_outage(&mut self, from: NodeId, to: NodeId, outage: f64) -> Result<(), RoutingError> {
        self.set_etx(from, to, etx(outage)?);
        Ok(())
    }

    /// ETX of a present edge; `None` for missing or permanently failed links.
    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.etx.get(&(from, to)).copied().filter(|w| w.is_finite())
    }

    pub fn contains(&self, hub: NodeId) -> bool {
        self.hubs.binary_search(&hub).is_ok()
    }

    /// Copy of the graph without `hub` and its edges.
    pub fn without(&self, hub: NodeId) -> Self {
        Self {
            hubs: self.hubs.iter().copied().filter(|&h| h != hub).collect(),
            etx: self.etx.iter().filter(|((a, b), _)| *a != hub && *b != hub).map(|(k, v)| (*k, *v)).collect(),
        }
    }
}

/// Hub sequence from source to destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePath {
    hubs: Vec<NodeId>,
}

impl RoutePath {
    pub fn direct(src: NodeId, dst: NodeId) -> Self {
        Self { hubs: vec![src, dst] }
    }

    pub fn via(src: NodeId, mid: NodeId, dst: NodeId) -> Self {
        Self { hubs: vec![src, mid, dst] }
    }

    pub fn hubs(&self) -> &[NodeId] {
        &self.hubs
    }

    pub fn hop_count(&self) -> usize {
        self.hubs.len() - 1
    }

    pub fn intermediate(&self) -> Option<NodeId> {
        (self.hubs.len() == 3).then(|| self.hubs[1])
    }

    pub fn route_hops(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.hubs.windows(2).map(|w| (w[0], w[1]))
    }

    /// Summed ETX, `None` if an edge is missing.
    pub fn etx(&self, graph: &HubGraph) -> Option<f64> {
        self.route_hops().map(|(a, b)| graph.edge(a, b)).sum()
    }
}

impl std::fmt::Display for RoutePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.hubs.iter().map(|h| h.to_string()).collect();
        f.write_str(&parts.join(">"))
    }
}

/// Cheapest path by summed ETX that has exactly two hops; the direct link
/// when no two-hop path exists. Equal costs go to the lowest intermediate hub.
///
/// Candidates are scanned in increasing ETX order and anything that is not a
/// two-hop path is skipped, so paths longer than two hops can never be chosen
/// and are not enumerated.
pub fn find_shortest_path(graph: &HubGraph, src: NodeId, dst: NodeId) -> Result<RoutePath, RoutingError> {
    if src == dst {
        return Err(RoutingError::SameEndpoints(src));
    }
    for h in [src, dst] {
        if !graph.contains(h) {
            return Err(RoutingError::UnknownHub(h));
        }
    }

    let mut candidates: Vec<(f64, RoutePath)> = Vec::new();
    if let Some(w) = graph.edge(src, dst) {
        candidates.push((w, RoutePath::direct(src, dst)));
    }
    for &mid in graph.hubs() {
        if mid == src || mid == dst {
            continue;
        }
        let path = RoutePath::via(src, mid, dst);
        if let Some(w) = path.etx(graph) {
            candidates.push((w, path));
        }
    }
    // Stable sort: hubs are visited in id order, so ties keep the lowest intermediate first.
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rest = candidates.as_slice();
    while let Some(((_, best), tail)) = rest.split_first() {
        if best.hop_count() == 2 {
            return Ok(best.clone());
        }
        rest = tail;
    }
    if graph.edge(src, dst).is_some() {
        Ok(RoutePath::direct(src, dst))
    } else {
        Err(RoutingError::NoRoute { src, dst })
    }
}

/// Branch SINRs of one route-hop. Relay entries are already the minimum of
/// their two link-hops; absent branches are `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteHopBranches {
    pub direct: f64,
    pub relayed: [f64; 2],
}

impl RouteHopBranches {
    pub fn from_link_hops(direct: f64, relay1: (f64, f64), relay2: (f64, f64)) -> Self {
        Self { direct, relayed: [relay1.0.min(relay1.1), relay2.0.min(relay2.1)] }
    }
}

/// Selection combining: the best of the three branches.
pub fn selection_combine(branches: &RouteHopBranches) -> Result<f64, RoutingError> {
    let best = [branches.direct, branches.relayed[0], branches.relayed[1]]
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        Err(RoutingError::AllBranchesAbsent)
    } else {
        Ok(best)
    }
}

/// SINR and received power of one directed link in a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkObs {
    pub tx: NodeId,
    pub rx: NodeId,
    pub sinr_db: f64,
    pub rx_power_dbm: f64,
}

impl LinkObs {
    fn read(links: &WindowLinks, tx: NodeId, rx: NodeId) -> Self {
        let s = links.get(tx, rx);
        Self { tx, rx, sinr_db: s.sinr_db, rx_power_dbm: s.rx_power_dbm }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayBranch {
    pub relay: NodeId,
    pub first: LinkObs,
    pub second: LinkObs,
}

impl RelayBranch {
    pub fn sinr_db(&self) -> f64 {
        self.first.sinr_db.min(self.second.sinr_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteHop {
    pub from: NodeId,
    pub to: NodeId,
    pub direct: LinkObs,
    pub relays: [RelayBranch; 2],
    /// Selection-combiner output; `-inf` if every branch is absent.
    pub combined_db: f64,
}

impl RouteHop {
    pub fn branches(&self) -> RouteHopBranches {
        RouteHopBranches {
            direct: self.direct.sinr_db,
            relayed: [self.relays[0].sinr_db(), self.relays[1].sinr_db()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEvaluation {
    pub path: RoutePath,
    pub hops: Vec<RouteHop>,
    /// Weakest route-hop.
    pub gamma_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SprEvaluation {
    pub path: RoutePath,
    pub hops: Vec<LinkObs>,
    /// Weakest hub link.
    pub gamma_comb_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmrEvaluation {
    /// One or two paths; the first is the SPR path.
    pub paths: Vec<PathEvaluation>,
    pub gamma_comb_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEvaluation {
    pub window: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub spr: SprEvaluation,
    pub cmr: CmrEvaluation,
}

impl RouteEvaluation {
    /// End-to-end SINR of the first path using hub links only.
    pub fn p1_direct_only_db(&self) -> f64 {
        self.spr.gamma_comb_db
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePlan {
    pub p1: RoutePath,
    pub p2: Option<RoutePath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RouteOptions {
    pub relay_side: RelaySide,
    pub p2_picker: PathPicker,
}

/// Picks the SPR path and the second CMR path.
pub fn select_routes(
    graph: &HubGraph,
    links: &WindowLinks,
    src: NodeId,
    dst: NodeId,
    picker: PathPicker,
) -> Result<RoutePlan, RoutingError> {
    let p1 = find_shortest_path(graph, src, dst)?;
    let Some(used) = p1.intermediate() else {
        return Ok(RoutePlan { p1, p2: None });
    };
    let p2 = match picker {
        PathPicker::Etx => match find_shortest_path(&graph.without(used), src, dst) {
            Ok(p) => Some(p),
            Err(RoutingError::NoRoute { .. }) => None,
            Err(e) => return Err(e),
        },
        PathPicker::NearestRssi => {
            // Strongest remaining hub as heard from the source; ties to the lowest id.
            let nearest = graph
                .hubs()
                .iter()
                .copied()
                .filter(|&h| h != src && h != dst && h != used)
                .fold(None::<(NodeId, f64)>, |best, h| {
                    let p = links.get(src, h).rx_power_dbm;
                    match best {
                        Some((_, bp)) if bp >= p => best,
                        _ => Some((h, p)),
                    }
                });
            match nearest {
                Some((h, _)) => Some(RoutePath::via(src, h, dst)),
                None => graph.edge(src, dst).map(|_| RoutePath::direct(src, dst)),
            }
        }
    };
    Ok(RoutePlan { p1, p2 })
}

/// Like [`select_routes`], but a source cut off from every hub still sends
/// over the direct link (which then carries its poor SINR).
pub fn select_routes_or_direct(
    graph: &HubGraph,
    links: &WindowLinks,
    src: NodeId,
    dst: NodeId,
    picker: PathPicker,
) -> Result<RoutePlan, RoutingError> {
    match select_routes(graph, links, src, dst, picker) {
        Err(RoutingError::NoRoute { .. }) => Ok(RoutePlan { p1: RoutePath::direct(src, dst), p2: None }),
        other => other,
    }
}

pub fn evaluate_route_hop(links: &WindowLinks, from: NodeId, to: NodeId, side: RelaySide) -> RouteHop {
    let relay_ban = match side {
        RelaySide::Rx => to.ban,
        RelaySide::Tx => from.ban,
    };
    let relays = Topology::relays_of(relay_ban).map(|r| RelayBranch {
        relay: r,
        first: LinkObs::read(links, from, r),
        second: LinkObs::read(links, r, to),
    });
    let mut hop = RouteHop {
        from,
        to,
        direct: LinkObs::read(links, from, to),
        relays,
        combined_db: f64::NEG_INFINITY,
    };
    hop.combined_db = selection_combine(&hop.branches()).unwrap_or(f64::NEG_INFINITY);
    hop
}

pub fn evaluate_path(links: &WindowLinks, path: &RoutePath, side: RelaySide) -> PathEvaluation {
    let hops: Vec<RouteHop> = path.route_hops().map(|(a, b)| evaluate_route_hop(links, a, b, side)).collect();
    let gamma_db = hops.iter().map(|h| h.combined_db).fold(f64::INFINITY, f64::min);
    PathEvaluation { path: path.clone(), hops, gamma_db }
}

/// SPR and CMR outcome of a fixed route plan on one window's links.
pub fn evaluate_plan(
    plan: &RoutePlan,
    links: &WindowLinks,
    window: usize,
    side: RelaySide,
) -> RouteEvaluation {
    let src = plan.p1.hubs()[0];
    let dst = *plan.p1.hubs().last().expect("paths have two ends");

    let spr_hops: Vec<LinkObs> = plan.p1.route_hops().map(|(a, b)| LinkObs::read(links, a, b)).collect();
    let spr_gamma = spr_hops.iter().map(|h| h.sinr_db).fold(f64::INFINITY, f64::min);

    let paths: Vec<PathEvaluation> =
        std::iter::once(&plan.p1).chain(plan.p2.as_ref()).map(|p| evaluate_path(links, p, side)).collect();
    let cmr_gamma = paths.iter().map(|p| p.gamma_db).fold(f64::NEG_INFINITY, f64::max);

    RouteEvaluation {
        window,
        src,
        dst,
        spr: SprEvaluation { path: plan.p1.clone(), hops: spr_hops, gamma_comb_db: spr_gamma },
        cmr: CmrEvaluation { paths, gamma_comb_db: cmr_gamma },
    }
}

/// Selects routes on `graph` and evaluates them on the same window's links.
pub fn evaluate_cmr(
    graph: &HubGraph,
    links: &WindowLinks,
    src: NodeId,
    dst: NodeId,
    window: usize,
    options: RouteOptions,
) -> Result<RouteEvaluation, RoutingError> {
    let plan = select_routes(graph, links, src, dst, options.p2_picker)?;
    Ok(evaluate_plan(&plan, links, window, options.relay_side))
}
