use super::Point;
use crate::scalar::cmp;
use crate::Real;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Real> Aabb<T> {
    pub fn empty() -> Self {
        let big = T::max_value().unwrap();
        Self {
            min: Point::new(big, big, big),
            max: Point::new(-big, -big, -big),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point<T>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point<T>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        let mut b = *self;
        b.grow(&other.min);
        b.grow(&other.max);
        b
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn diagonal(&self) -> T {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Point<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn longest_axis(&self) -> usize {
        let d = self.max - self.min;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    /// Squared distance from `p` to the box; zero inside.
    pub fn distance_squared(&self, p: &Point<T>) -> T {
        let mut d2 = T::zero();
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                T::zero()
            };
            d2 += v * v;
        }
        d2
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

/// Axis-aligned bounding-volume hierarchy over triangle faces.
///
/// Median split on the longest centroid axis, at most eight faces per leaf.
#[derive(Debug, Clone)]
pub struct Bvh<T: Real> {
    bounds: Vec<Aabb<T>>,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl<T: Real> Bvh<T> {
    pub fn build(vertices: &[Point<T>], faces: &[[usize; 3]]) -> Self {
        let face_boxes: Vec<Aabb<T>> = faces
            .iter()
            .map(|f| Aabb::from_points(f.iter().map(|&i| &vertices[i])))
            .collect();
        let centroids: Vec<Point<T>> = face_boxes.iter().map(Aabb::center).collect();
        let mut bvh = Self {
            bounds: Vec::new(),
            nodes: Vec::new(),
            order: (0..faces.len()).collect(),
        };
        bvh.build_node(0, faces.len(), &face_boxes, &centroids);
        bvh
    }

    fn build_node(&mut self, start: usize, end: usize, boxes: &[Aabb<T>], centroids: &[Point<T>]) -> usize {
        let slice = &mut self.order[start..end];
        let bounds = slice.iter().fold(Aabb::empty(), |acc, &f| acc.merge(&boxes[f]));
        let id = self.nodes.len();
        self.bounds.push(bounds);
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start,
                count: end - start,
            });
            return id;
        }
        let axis = Aabb::from_points(slice.iter().map(|&f| &centroids[f])).longest_axis();
        let mid = (end - start) / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| cmp(&centroids[a][axis], &centroids[b][axis]));
        self.nodes.push(Node::Leaf { start, count: 0 });
        let left = self.build_node(start, start + mid, boxes, centroids);
        let right = self.build_node(start + mid, end, boxes, centroids);
        self.nodes[id] = Node::Inner { left, right };
        id
    }

    /// Nearest face to `p` under the supplied exact point-face distance.
    ///
    /// `face_query` returns the closest point on a face and its barycentric
    /// weights. Ties keep the lowest face index.
    pub fn closest<F>(&self, p: &Point<T>, face_query: F) -> (usize, Point<T>, [T; 3])
    where
        F: Fn(usize) -> (Point<T>, [T; 3]),
    {
        let mut best_d2 = T::max_value().unwrap();
        let mut best: Option<(usize, Point<T>, [T; 3])> = None;
        let mut stack: Vec<(usize, T)> = Vec::with_capacity(64);
        stack.push((0, self.bounds[0].distance_squared(p)));
        while let Some((node, d2)) = stack.pop() {
            if d2 > best_d2 {
                continue;
            }
            match self.nodes[node] {
                Node::Leaf { start, count } => {
                    for &f in &self.order[start..start + count] {
                        let (q, w) = face_query(f);
                        let fd2 = (q - p).norm_squared();
                        let better = match &best {
                            None => true,
                            Some((bf, _, _)) => fd2 < best_d2 || (fd2 == best_d2 && f < *bf),
                        };
                        if better {
                            best_d2 = fd2;
                            best = Some((f, q, w));
                        }
                    }
                }
                Node::Inner { left, right } => {
                    let dl = self.bounds[left].distance_squared(p);
                    let dr = self.bounds[right].distance_squared(p);
                    // push the farther child first so the nearer one is popped next
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best.expect("bvh over a non-empty mesh")
    }
}
