use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::scalar::cmp;
use crate::Real;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

struct Entry<T: Real> {
    dist: T,
    vertex: usize,
}

impl<T: Real> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Entry<T> {}

impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Entry<T> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        cmp(&other.dist, &self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Multi-source Dijkstra over the mesh edge graph.
///
/// Each source is a `(vertex, offset)` pair; the vertex starts at `offset`
/// instead of zero. Edge weights are Euclidean edge lengths. Vertices not
/// reachable from any source come back as `+inf`.
pub fn geodesic_from_sources<T: Real>(mesh: &TriangleMesh<T>, sources: &[(usize, T)]) -> Result<Vec<T>> {
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let inf = T::lit(f64::INFINITY);
    let mut dist = vec![inf; mesh.vertices().len()];
    let mut heap = BinaryHeap::new();
    for &(v, offset) in sources {
        if offset < dist[v] {
            dist[v] = offset;
            heap.push(Entry {
                dist: offset,
                vertex: v,
            });
        }
    }
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &e in mesh.vertex_edges(v) {
            let [a, b] = mesh.edges()[e];
            let u = if a == v { b } else { a };
            let nd = d + mesh.edge_length(e);
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Entry { dist: nd, vertex: u });
            }
        }
    }
    Ok(dist)
}
