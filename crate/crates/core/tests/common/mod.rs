//! Reference implementations used as independent oracles. None of them call
//! into the library beyond plain data accessors.
#![allow(dead_code)]

use bnlimits::dag::Dag;

/// `a ⟂ b | z` in `g`, decided on the moral graph of the ancestral set of
/// `{a, b} ∪ z` (Lauritzen's criterion).
pub fn d_separated(g: &Dag, a: usize, b: usize, z: u64) -> bool {
    let m = g.m();
    // Ancestral closure.
    let mut anc = (1u64 << a) | (1u64 << b) | z;
    loop {
        let mut next = anc;
        for i in 0..m {
            if anc >> i & 1 == 1 {
                next |= g.parent_mask(i);
            }
        }
        if next == anc {
            break;
        }
        anc = next;
    }
    // Moralise: parent-child edges plus married parents, within `anc`.
    let mut adj = vec![0u64; m];
    for i in 0..m {
        if anc >> i & 1 == 0 {
            continue;
        }
        let ps = g.parent_mask(i);
        for p in 0..m {
            if ps >> p & 1 == 1 {
                adj[i] |= 1 << p;
                adj[p] |= 1 << i;
                adj[p] |= ps & !(1 << p);
            }
        }
    }
    // Search from a avoiding z.
    let mut seen = 1u64 << a;
    let mut stack = vec![a];
    while let Some(u) = stack.pop() {
        if u == b {
            return false;
        }
        for w in 0..m {
            if adj[u] >> w & 1 == 1 && seen >> w & 1 == 0 && z >> w & 1 == 0 {
                seen |= 1 << w;
                stack.push(w);
            }
        }
    }
    true
}

/// Every d-separation statement of `g`, as a bit vector over
/// (pair, conditioning subset of the remaining nodes).
pub fn independence_signature(g: &Dag) -> Vec<bool> {
    let m = g.m();
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let rest: Vec<usize> = (0..m).filter(|&x| x != a && x != b).collect();
            for s in 0..1u64 << rest.len() {
                let z = rest
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| s >> j & 1 == 1)
                    .fold(0u64, |acc, (_, &x)| acc | 1 << x);
                out.push(d_separated(g, a, b, z));
            }
        }
    }
    out
}

fn binom(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Labeled DAGs on `m` nodes by Robinson's recurrence.
pub fn robinson(m: usize) -> u128 {
    let mut a = vec![1u128];
    for n in 1..=m as u64 {
        let mut s: i128 = 0;
        for k in 1..=n {
            let term = binom(n, k) as i128 * (1i128 << (k * (n - k))) * a[(n - k) as usize] as i128;
            s += if k % 2 == 1 { term } else { -term };
        }
        a.push(s as u128);
    }
    a[m]
}

/// Every DAG on `m` nodes, generated by brute force over all parent-mask
/// tuples and an explicit acyclicity test (no library enumeration).
pub fn all_dags(m: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut masks = vec![0u64; m];
    fn acyclic(masks: &[u64]) -> bool {
        let m = masks.len();
        let mut done = 0u64;
        loop {
            let ready = (0..m).find(|&i| done >> i & 1 == 0 && masks[i] & !done == 0);
            match ready {
                Some(i) => done |= 1 << i,
                None => return done.count_ones() as usize == m,
            }
        }
    }
    fn rec(i: usize, masks: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        let m = masks.len();
        if i == m {
            if acyclic(masks) {
                out.push(masks.clone());
            }
            return;
        }
        for s in 0..1u64 << m {
            if s >> i & 1 == 0 {
                masks[i] = s;
                rec(i + 1, masks, out);
            }
        }
        masks[i] = 0;
    }
    rec(0, &mut masks, &mut out);
    out
}

/// Layer of each node for a bottom-to-top layer list, nodes numbered from
/// the top layer down.
pub fn layer_of_nodes(layers: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for (l, &size) in layers.iter().enumerate().rev() {
        out.extend(std::iter::repeat_n(l, size));
    }
    out
}

/// Whether a DAG (as parent masks) respects the layering: every parent of a
/// node sits exactly one layer above it, and in-degrees are at most `k`.
pub fn is_layered(masks: &[u64], layers: &[usize], k: Option<usize>) -> bool {
    let lay = layer_of_nodes(layers);
    masks.iter().enumerate().all(|(i, &ps)| {
        k.is_none_or(|k| ps.count_ones() as usize <= k)
            && (0..masks.len()).all(|p| ps >> p & 1 == 0 || lay[p] == lay[i] + 1)
    })
}
