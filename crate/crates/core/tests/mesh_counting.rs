use contract_zoom::mesh::{mesh_enumerate, CandidateSet, Cell, CellCount, UniformMesh};
use proptest::prelude::*;

/// All cells of a given depth in `m` dimensions.
fn cells(m: usize, depth: u32) -> Vec<Cell> {
    let n = 1u64 << depth;
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut flat| {
            let mut corner = vec![0; m];
            for c in corner.iter_mut().rev() {
                *c = flat % n;
                flat /= n;
            }
            Cell::new(depth, corner).unwrap()
        })
        .collect()
}

/// Grid index vectors with `Σ i ≤ ⌊den/num⌋`, by plain nested enumeration.
fn lattice(m: usize, budget: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u64>| {
                let used: u64 = p.iter().sum();
                (0..=budget - used).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// `i·num/den ∈ [k/2^j, (k+1)/2^j]` in integers.
fn inside(idx: &[u64], cell: &Cell, num: u64, den: u64) -> bool {
    let scale = 1u64 << cell.depth();
    idx.iter()
        .zip(cell.corner())
        .all(|(&i, &k)| i * num * scale >= k * den && i * num * scale <= (k + 1) * den)
}

#[test]
fn counting_matches_brute_force() {
    for (num, den) in [(1u64, 1u64), (1, 2), (1, 4), (2, 25)] {
        for m in 1..=3usize {
            let mesh = UniformMesh::from_ratio(m, num, den).unwrap();
            let set = CandidateSet::<f64>::UniformMesh(mesh.clone());
            let points = lattice(m, den / num);
            assert_eq!(points.len() as u128, mesh.size());
            assert_eq!(mesh_enumerate::<f64>(&mesh).len(), points.len());
            let max_depth = if num == 2 { 3 } else { 4 };
            for depth in 0..=max_depth {
                for cell in cells(m, depth) {
                    let hits: Vec<&Vec<u64>> = points.iter().filter(|p| inside(p, &cell, num, den)).collect();
                    let got = set.count_candidates(&cell);
                    match hits.len() {
                        0 => assert_eq!(got, CellCount::Zero, "{cell} δ={num}/{den}"),
                        1 => {
                            let x: Vec<f64> = hits[0].iter().map(|&i| (i * num) as f64 / den as f64).collect();
                            match got {
                                CellCount::One(c) => assert_eq!(c.increments(), x.as_slice(), "{cell}"),
                                other => panic!("{cell} δ={num}/{den}: expected one, got {other:?}"),
                            }
                        }
                        _ => assert_eq!(got, CellCount::Many, "{cell} δ={num}/{den}"),
                    }
                    assert_eq!(set.candidates_in(&cell).unwrap().len(), hits.len(), "{cell}");
                }
            }
        }
    }
}

#[test]
fn known_mesh_sizes() {
    assert_eq!(mesh_enumerate::<f64>(&UniformMesh::new(1, 0.25).unwrap()).len(), 5);
    assert_eq!(mesh_enumerate::<f64>(&UniformMesh::new(2, 0.5).unwrap()).len(), 6);
    assert_eq!(mesh_enumerate::<f64>(&UniformMesh::new(2, 0.25).unwrap()).len(), 15);
}

#[test]
fn quadrants_tile_the_parent() {
    let root = Cell::root(2);
    let kids = root.quadrants(20).unwrap();
    assert_eq!(kids.len(), 4);
    assert!(kids.iter().all(|k| root.contains_cell(k) && k.side::<f64>() == 0.5));
    let half = Cell::new(1, vec![1]).unwrap();
    let kids = half.quadrants(20).unwrap();
    assert_eq!(kids[0].lower::<f64>(), vec![0.5]);
    assert_eq!(kids[0].upper::<f64>(), vec![0.75]);
    assert_eq!(kids[1].upper::<f64>(), vec![1.0]);
    assert!(half.quadrants(1).is_err());
}

proptest! {
    #[test]
    fn split_paths_stay_dyadic(m in 1usize..=3, path in prop::collection::vec(any::<u8>(), 0..12)) {
        let mut cell = Cell::root(m);
        for step in path {
            let kids = cell.quadrants(20).unwrap();
            let child = kids[step as usize % kids.len()].clone();
            prop_assert!(cell.contains_cell(&child));
            prop_assert_eq!(child.depth(), cell.depth() + 1);
            let (lo, hi) = (child.lower::<f64>(), child.upper::<f64>());
            for (l, h) in lo.iter().zip(&hi) {
                prop_assert_eq!(h - l, child.side::<f64>());
            }
            let text = child.to_string();
            prop_assert_eq!(text.parse::<Cell>().unwrap(), child.clone());
            cell = child;
        }
    }

    #[test]
    fn full_space_relevance_and_anchor_order(m in 1usize..=3, depth in 0u32..6, seed in any::<u64>()) {
        let n = 1u64 << depth;
        let corner: Vec<u64> = (0..m).map(|i| (seed >> (i * 8)) % n).collect();
        let cell = Cell::new(depth, corner.clone()).unwrap();
        let set = CandidateSet::<f64>::full_space(m);
        prop_assert_eq!(set.is_relevant(&cell), corner.iter().sum::<u64>() <= n);
        if let Ok(contract_zoom::Anchors::Composite { lower, upper }) = set.anchors_of(&cell) {
            prop_assert!(upper.dominates(&lower));
            prop_assert!(lower.is_bounded());
        }
    }
}
