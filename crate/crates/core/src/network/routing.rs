use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap};

use super::{DemandSpec, TrafficNetwork};

/// Whether a vehicle may pass from link `from` onto link `to`.
///
/// Immediate reversals are never allowed. At signalized nodes only movements
/// listed in some phase are; at other nodes any other continuation is.
pub(crate) fn movement_allowed(net: &TrafficNetwork, from: usize, to: usize) -> bool {
    let (a, b) = (&net.links[from], &net.links[to]);
    if a.to != b.from || b.to == a.from {
        return false;
    }
    match net.junction_at_node(&a.to) {
        Some(j) => net.junctions[j]
            .phases
            .iter()
            .any(|p| p.movements.iter().any(|(i, o)| *i == a.id && *o == b.id)),
        None => true,
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    link: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.link.cmp(&self.link))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fastest free-flow route from `origin` node to `destination` node as a
/// sequence of link indices, honoring allowed turning movements.
pub fn shortest_route(net: &TrafficNetwork, origin: &str, destination: &str) -> Option<Vec<usize>> {
    let n = net.links.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for (i, l) in net.links.iter().enumerate() {
        if l.from == origin {
            dist[i] = l.free_flow_time();
            heap.push(Entry {
                cost: dist[i],
                link: i,
            });
        }
    }
    while let Some(Entry { cost, link }) = heap.pop() {
        if cost > dist[link] {
            continue;
        }
        if net.links[link].to == destination {
            let mut route = vec![link];
            let mut cur = link;
            while let Some(p) = prev[cur] {
                route.push(p);
                cur = p;
            }
            route.reverse();
            return Some(route);
        }
        for next in 0..n {
            if !movement_allowed(net, link, next) {
                continue;
            }
            let c = cost + net.links[next].free_flow_time();
            if c < dist[next] {
                dist[next] = c;
                prev[next] = Some(link);
                heap.push(Entry { cost: c, link: next });
            }
        }
    }
    None
}

/// Fixed routes for every OD pair in the demand, keyed by (origin, destination) zone ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteTable {
    routes: BTreeMap<(String, String), Vec<usize>>,
}

impl RouteTable {
    pub fn build(net: &TrafficNetwork, demand: &DemandSpec) -> Self {
        let mut routes = BTreeMap::new();
        for od in &demand.od {
            let key = (od.origin.clone(), od.destination.clone());
            if routes.contains_key(&key) {
                continue;
            }
            let (Some(o), Some(d)) = (net.zone(&od.origin), net.zone(&od.destination)) else {
                continue;
            };
            if let Some(r) = shortest_route(net, &o.node, &d.node) {
                routes.insert(key, r);
            }
        }
        Self { routes }
    }

    pub fn get(&self, origin: &str, destination: &str) -> Option<&[usize]> {
        self.routes
            .get(&(origin.to_string(), destination.to_string()))
            .map(Vec::as_slice)
    }
}
