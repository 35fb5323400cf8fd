//! Iterative Tarjan over a CSR graph.
//!
//! Components are emitted in reverse topological order of the condensation:
//! when a component is emitted, every component it can reach has already been
//! emitted. The longest-path DP relies on this.

const UNVISITED: u32 = u32::MAX;

/// Compressed adjacency: successors of `v` are `targets[offsets[v]..offsets[v+1]]`.
pub trait Csr {
    fn vertex_count(&self) -> usize;
    fn successors(&self, v: usize) -> &[u32];
}

/// Calls `emit` once per strongly connected component, sinks first.
pub fn tarjan<G: Csr>(g: &G, mut emit: impl FnMut(&[u32])) {
    let n = g.vertex_count();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    // (vertex, next successor position)
    let mut call: Vec<(u32, u32)> = Vec::new();
    let mut next_index = 0u32;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root as u32, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(&(v, pos)) = call.last() {
            let vi = v as usize;
            let succ = g.successors(vi);
            if (pos as usize) < succ.len() {
                call.last_mut().expect("nonempty").1 += 1;
                let w = succ[pos as usize] as usize;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    call.push((w as u32, 0));
                } else if on_stack[w] {
                    low[vi] = low[vi].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                let p = parent as usize;
                low[p] = low[p].min(low[vi]);
            }
            if low[vi] == index[vi] {
                let start = stack.iter().rposition(|&x| x == v).expect("root on stack");
                for &x in &stack[start..] {
                    on_stack[x as usize] = false;
                }
                emit(&stack[start..]);
                stack.truncate(start);
            }
        }
    }
}
