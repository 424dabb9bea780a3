use super::ShapeTree;

/// Removes every non-root shape whose area lies outside `[a_min, a_max]`.
/// Survivors are re-attached to their nearest surviving ancestor and keep
/// their relative id order; pixels of removed shapes move to the nearest
/// surviving ancestor.
pub fn prune_by_area(tree: &ShapeTree, a_min: u64, a_max: u64) -> ShapeTree {
    assert!(1 <= a_min && a_min <= a_max, "prune_by_area needs 1 <= a_min <= a_max");
    let count = tree.len();
    let root = tree.root();
    let keep: Vec<bool> = tree
        .shapes()
        .iter()
        .map(|s| s.id == root || (a_min..=a_max).contains(&s.area))
        .collect();

    let mut new_id = vec![usize::MAX; count];
    let mut next = 0;
    for (old, &k) in keep.iter().enumerate() {
        if k {
            new_id[old] = next;
            next += 1;
        }
    }
    // nearest surviving ancestor-or-self, resolved top-down
    let mut survivor = vec![usize::MAX; count];
    for s in tree.top_down() {
        survivor[s] = if keep[s] {
            s
        } else {
            survivor[tree.shape(s).parent.expect("root is always kept")]
        };
    }

    let mut parents = vec![None; next];
    let mut levels = vec![0; next];
    let mut polarities = vec![crate::tree::Polarity::Bright; next];
    for s in tree.shapes() {
        if !keep[s.id] {
            continue;
        }
        let id = new_id[s.id];
        parents[id] = s.parent.map(|p| new_id[survivor[p]]);
        levels[id] = s.level;
        polarities[id] = s.polarity;
    }
    let smallest = tree
        .smallest_shape()
        .iter()
        .map(|&s| new_id[survivor[s as usize]] as u32)
        .collect();
    ShapeTree::assemble(
        tree.width(),
        tree.height(),
        tree.exterior_level(),
        parents,
        levels,
        polarities,
        smallest,
    )
}
