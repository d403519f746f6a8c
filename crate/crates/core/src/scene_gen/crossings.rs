use std::collections::{HashMap, HashSet};

use super::{CablePath, CrossingGT, Layer, Scene, SceneError, StrandRef};
use crate::geometry::{cumulative_lengths, segment_intersection, Point};

/// Raw intersections closer than this are one crossing.
pub const CROSSING_MERGE_RADIUS: f64 = 2.0;

const CELL: f64 = 16.0;

#[derive(Clone, Copy, Debug)]
struct RawHit {
    a: StrandRef,
    b: StrandRef,
    point: Point,
}

/// Every crossing between (and within) the given cables.
///
/// Segment pairs are found through a uniform grid, raw intersections within
/// `merge_radius` are clustered, and each cluster must involve exactly two
/// strand passes. All crossings come back with `over == Layer::A`; callers
/// assign z-order.
pub fn find_crossings(cables: &[CablePath], merge_radius: f64) -> Result<Vec<CrossingGT>, SceneError> {
    let cums: Vec<Vec<f64>> = cables.iter().map(|c| cumulative_lengths(c.points())).collect();

    // segment id = (cable index, segment index)
    let mut grid: HashMap<(i64, i64), Vec<(usize, usize)>> = HashMap::new();
    for (ci, cable) in cables.iter().enumerate() {
        for (si, w) in cable.points().windows(2).enumerate() {
            let (x0, x1) = (w[0].x.min(w[1].x), w[0].x.max(w[1].x));
            let (y0, y1) = (w[0].y.min(w[1].y), w[0].y.max(w[1].y));
            for gx in (x0 / CELL).floor() as i64..=(x1 / CELL).floor() as i64 {
                for gy in (y0 / CELL).floor() as i64..=(y1 / CELL).floor() as i64 {
                    grid.entry((gx, gy)).or_default().push((ci, si));
                }
            }
        }
    }

    let mut tested: HashSet<((usize, usize), (usize, usize))> = HashSet::new();
    let mut hits: Vec<RawHit> = Vec::new();
    let mut keys: Vec<&(i64, i64)> = grid.keys().collect();
    keys.sort();
    for key in keys {
        let segs = &grid[key];
        for (k, &s1) in segs.iter().enumerate() {
            for &s2 in &segs[k + 1..] {
                let (p, q) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
                if p.0 == q.0 && q.1 <= p.1 + 1 {
                    continue;
                }
                if !tested.insert((p, q)) {
                    continue;
                }
                let (pa, pb) = (cables[p.0].points()[p.1], cables[p.0].points()[p.1 + 1]);
                let (qa, qb) = (cables[q.0].points()[q.1], cables[q.0].points()[q.1 + 1]);
                if let Some((t, u, point)) = segment_intersection(pa, pb, qa, qb) {
                    let arc_p = cums[p.0][p.1] + t * (cums[p.0][p.1 + 1] - cums[p.0][p.1]);
                    let arc_q = cums[q.0][q.1] + u * (cums[q.0][q.1 + 1] - cums[q.0][q.1]);
                    hits.push(RawHit {
                        a: StrandRef { cable: cables[p.0].id, segment: p.1, arc: arc_p },
                        b: StrandRef { cable: cables[q.0].id, segment: q.1, arc: arc_q },
                        point,
                    });
                }
            }
        }
    }
    hits.sort_by(|x, y| {
        (x.a.cable, x.a.segment, x.b.cable, x.b.segment).cmp(&(y.a.cable, y.a.segment, y.b.cable, y.b.segment))
    });
    merge_hits(&hits, merge_radius)
}

fn merge_hits(hits: &[RawHit], merge_radius: f64) -> Result<Vec<CrossingGT>, SceneError> {
    let n = hits.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut i = i;
        while parent[i] != r {
            let next = parent[i];
            parent[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if hits[i].point.dist(hits[j].point) <= merge_radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut index_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let slot = *index_of_root.entry(r).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(i);
    }

    let pass_gap = 3.0 * merge_radius + 2.0;
    let mut out = Vec::new();
    for members in clusters {
        let mut strands: Vec<(usize, f64)> =
            members.iter().flat_map(|&i| [(hits[i].a.cable, hits[i].a.arc), (hits[i].b.cable, hits[i].b.arc)]).collect();
        strands.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut passes = 1;
        for w in strands.windows(2) {
            if w[0].0 != w[1].0 || w[1].1 - w[0].1 > pass_gap {
                passes += 1;
            }
        }
        let mean = members.iter().fold(Point::default(), |acc, &i| acc + hits[i].point) * (1.0 / members.len() as f64);
        match passes {
            1 => continue,
            2 => {}
            _ => return Err(SceneError::ThreeStrandCrossing { x: mean.x, y: mean.y }),
        }
        let best = *members
            .iter()
            .min_by(|&&i, &&j| hits[i].point.dist(mean).partial_cmp(&hits[j].point.dist(mean)).unwrap())
            .unwrap();
        let h = hits[best];
        out.push(CrossingGT { position: h.point, strand_a: h.a, strand_b: h.b, over: Layer::A });
    }
    out.sort_by(|x, y| {
        (x.strand_a.cable, x.strand_a.arc)
            .partial_cmp(&(y.strand_a.cable, y.strand_a.arc))
            .unwrap()
    });
    Ok(out)
}

/// Recompute every crossing of the scene from its geometry and read each
/// one's z-order from the scene's stored assignments.
pub fn ground_truth_crossings(scene: &Scene) -> Result<Vec<CrossingGT>, SceneError> {
    let mut found = find_crossings(&scene.cables, CROSSING_MERGE_RADIUS)?;
    for c in &mut found {
        let stored = scene
            .crossings_gt
            .iter()
            .filter(|s| {
                s.strand_a.cable == c.strand_a.cable
                    && s.strand_b.cable == c.strand_b.cable
                    && s.position.dist(c.position) <= CROSSING_MERGE_RADIUS
            })
            .min_by(|x, y| x.position.dist(c.position).partial_cmp(&y.position.dist(c.position)).unwrap())
            .ok_or(SceneError::MissingZOrder { x: c.position.x, y: c.position.y })?;
        c.over = stored.over;
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_gen::Canvas;

    fn straight(id: usize, a: Point, b: Point) -> CablePath {
        CablePath::from_controls(id, vec![a, b], 6.0)
    }

    #[test]
    fn straight_line_has_no_crossings() {
        let c = straight(0, Point::new(10.0, 10.0), Point::new(200.0, 150.0));
        assert!(find_crossings(&[c], CROSSING_MERGE_RADIUS).unwrap().is_empty());
    }

    #[test]
    fn diagonals_cross_once_at_center() {
        let a = straight(0, Point::new(0.0, 0.0), Point::new(10.0, 10.0));
        let b = straight(1, Point::new(0.0, 10.0), Point::new(10.0, 0.0));
        let found = find_crossings(&[a, b], CROSSING_MERGE_RADIUS).unwrap();
        assert_eq!(found.len(), 1);
        assert!(found[0].position.dist(Point::new(5.0, 5.0)) < 1e-9);
        assert_eq!((found[0].strand_a.cable, found[0].strand_b.cable), (0, 1));
    }

    #[test]
    fn three_strands_through_one_point_are_rejected() {
        let c = Point::new(100.0, 100.0);
        let cables: Vec<CablePath> = (0..3)
            .map(|i| {
                let d = Point::from_angle(i as f64 * std::f64::consts::PI / 3.0) * 50.0;
                straight(i, c - d, c + d)
            })
            .collect();
        assert!(matches!(
            find_crossings(&cables, CROSSING_MERGE_RADIUS),
            Err(SceneError::ThreeStrandCrossing { .. })
        ));
    }

    #[test]
    fn stored_z_order_is_read_back() {
        let a = straight(0, Point::new(0.0, 0.0), Point::new(100.0, 100.0));
        let b = straight(1, Point::new(0.0, 100.0), Point::new(100.0, 0.0));
        let scene = Scene::from_cables(Canvas::default(), vec![a, b], |_| Layer::B).unwrap();
        let gt = ground_truth_crossings(&scene).unwrap();
        assert_eq!(gt.len(), 1);
        assert_eq!(gt[0].over, Layer::B);
        assert_eq!(gt[0].over_strand().cable, 1);
    }

    #[test]
    fn missing_assignment_is_an_error() {
        let a = straight(0, Point::new(0.0, 0.0), Point::new(100.0, 100.0));
        let b = straight(1, Point::new(0.0, 100.0), Point::new(100.0, 0.0));
        let mut scene = Scene::from_cables(Canvas::default(), vec![a, b], |_| Layer::A).unwrap();
        scene.crossings_gt.clear();
        assert!(matches!(ground_truth_crossings(&scene), Err(SceneError::MissingZOrder { .. })));
    }
}
