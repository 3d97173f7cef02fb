use crate::sdg::Sdg;

/// Strongly connected components over dependence and call edges.
/// Returns the component index of every vertex and whether each component
/// contains a cycle (more than one vertex, or a self edge).
pub(crate) fn components(g: &Sdg) -> (Vec<u32>, Vec<bool>) {
    let n = g.len();
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut cyclic = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0u32;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = work.last_mut() {
            let succs = &g.succs[v];
            if *i < succs.len() {
                let w = succs[*i].to.index();
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let id = cyclic.len() as u32;
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = id;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                let self_loop = g.succs[v].iter().any(|s| s.to.index() == v);
                cyclic.push(size > 1 || self_loop);
            }
        }
    }
    (comp, cyclic)
}
