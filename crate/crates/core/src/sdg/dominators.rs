//! Iterative dominator computation (Cooper, Harvey and Kennedy).

/// Immediate dominators of every node reachable from `root` along `succs`.
/// The root and unreachable nodes map to `None`.
pub(crate) fn immediate_dominators(root: usize, succs: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = succs.len();
    let postorder = postorder(root, succs);
    let mut po_num = vec![usize::MAX; n];
    for (i, &b) in postorder.iter().enumerate() {
        po_num[b] = i;
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, ss) in succs.iter().enumerate() {
        if po_num[a] == usize::MAX {
            continue;
        }
        for &b in ss {
            preds[b].push(a);
        }
    }

    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[root] = Some(root);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in postorder.iter().rev() {
            if b == root {
                continue;
            }
            let mut new_idom: Option<usize> = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, &po_num, p, cur),
                });
            }
            if new_idom.is_some() && idom[b] != new_idom {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    idom[root] = None;
    idom
}

fn intersect(idom: &[Option<usize>], po_num: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while po_num[a] < po_num[b] {
            a = idom[a].expect("processed node has an idom");
        }
        while po_num[b] < po_num[a] {
            b = idom[b].expect("processed node has an idom");
        }
    }
    a
}

fn postorder(root: usize, succs: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; succs.len()];
    let mut out = Vec::with_capacity(succs.len());
    let mut stack = vec![(root, 0usize)];
    seen[root] = true;
    while let Some(top) = stack.last_mut() {
        let node = top.0;
        if let Some(&s) = succs[node].get(top.1) {
            top.1 += 1;
            if !seen[s] {
                seen[s] = true;
                stack.push((s, 0));
            }
        } else {
            out.push(node);
            stack.pop();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond() {
        // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3
        let succs = vec![vec![1, 2], vec![3], vec![3], vec![]];
        let idom = immediate_dominators(0, &succs);
        assert_eq!(idom, vec![None, Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn loop_with_exit() {
        // 0 -> 1 -> 2 -> 1, 1 -> 3; 4 unreachable
        let succs = vec![vec![1], vec![2, 3], vec![1], vec![], vec![3]];
        let idom = immediate_dominators(0, &succs);
        assert_eq!(idom, vec![None, Some(0), Some(1), Some(1), None]);
    }
}
