use std::collections::{BTreeSet, HashSet};

use super::{
    check_conservation, conjugate_legs, is_self_adjoint, normal_order, synthesize_effective, EffectiveProcess,
    InteractionVertex, Leg, Mode, ModeGraph,
};
use crate::error::Result;

/// Finds every conservation-passing effective process reachable by
/// contracting shared modes of `vertices`, up to `max_order` (legs − 1).
///
/// A candidate uses at least two distinct vertices, never a vertex together
/// with its own h.c. partner (those give self-energy corrections, not new
/// processes), and must not be self-adjoint. Results are deduplicated up to
/// leg ordering and global h.c. orientation.
pub fn enumerate_syntheses(
    graph: &ModeGraph,
    vertices: &[InteractionVertex],
    max_order: usize,
) -> Result<Vec<EffectiveProcess>> {
    for v in vertices {
        v.validate()?;
        for leg in &v.legs {
            graph.require(&leg.mode)?;
        }
    }
    let max_order = max_order.max(3);
    let shared = shared_modes(vertices);
    if shared.is_empty() {
        return Ok(Vec::new());
    }

    // multiplicity per vertex, signed by orientation
    let max_uses = max_order as i32;
    let mut found = Vec::new();
    let mut seen = HashSet::new();
    let mut uses = vec![0i32; vertices.len()];
    let mut combos = Vec::new();
    collect_combos(&mut uses, 0, max_uses, &mut combos);

    for combo in combos {
        let distinct = combo.iter().filter(|&&u| u != 0).count();
        if distinct < 2 {
            continue;
        }
        // the first used vertex fixes the global orientation
        if combo.iter().find(|&&u| u != 0).is_some_and(|&u| u < 0) {
            continue;
        }
        let instances: Vec<InteractionVertex> = combo
            .iter()
            .zip(vertices)
            .flat_map(|(&u, v)| {
                let oriented = if u < 0 { v.flipped() } else { v.clone() };
                std::iter::repeat_n(oriented, u.unsigned_abs() as usize)
            })
            .collect();
        let total_legs: usize = instances.iter().map(|v| v.legs.len()).sum();

        for subset in 1u32..(1 << shared.len()) {
            let virt: Vec<&Mode> = shared
                .iter()
                .enumerate()
                .filter(|(i, _)| subset >> i & 1 == 1)
                .filter_map(|(_, label)| graph.get(label))
                .collect();
            let Some(contracted) = balanced_contractions(&instances, &virt) else {
                continue;
            };
            let external = total_legs - 2 * contracted;
            if external < 4 || external > max_order + 1 {
                continue;
            }
            if !connected(&instances, &virt) {
                continue;
            }
            let virtual_modes: Vec<Mode> = virt.iter().map(|&m| m.clone()).collect();
            let lambdas: Vec<_> = virtual_modes.iter().map(Mode::lambda).collect();
            // orientation is already fixed per instance, so composition only
            // needs to accept it; pass the instances verbatim
            let Ok(process) = synthesize_effective(&instances, &virtual_modes, &lambdas) else {
                continue;
            };
            if is_self_adjoint(&process.legs) {
                continue;
            }
            if !check_conservation(graph, &process.legs, None)?.passes {
                continue;
            }
            let key = canonical_key(&process.legs);
            if seen.insert(key) {
                found.push(process);
            }
        }
    }
    found.sort_by(|a, b| {
        a.legs
            .len()
            .cmp(&b.legs.len())
            .then_with(|| canonical_key(&a.legs).cmp(&canonical_key(&b.legs)))
    });
    Ok(found)
}

fn shared_modes(vertices: &[InteractionVertex]) -> Vec<String> {
    let mut all: BTreeSet<&str> = BTreeSet::new();
    for v in vertices {
        all.extend(v.legs.iter().map(|l| l.mode.as_str()));
    }
    all.into_iter()
        .filter(|m| vertices.iter().filter(|v| v.touches(m)).count() >= 2)
        .map(str::to_owned)
        .collect()
}

fn collect_combos(uses: &mut Vec<i32>, idx: usize, budget: i32, out: &mut Vec<Vec<i32>>) {
    if idx == uses.len() {
        out.push(uses.clone());
        return;
    }
    let spent: i32 = uses[..idx].iter().map(|u| u.abs()).sum();
    for u in -(budget - spent)..=(budget - spent) {
        uses[idx] = u;
        collect_combos(uses, idx + 1, budget, out);
    }
    uses[idx] = 0;
}

/// Number of contracted pairs when every virtual mode is balanced as the
/// instances are oriented, otherwise `None`.
fn balanced_contractions(instances: &[InteractionVertex], virt: &[&Mode]) -> Option<usize> {
    let mut pairs = 0;
    for mode in virt {
        let mut creations = 0;
        let mut annihilations = 0;
        for leg in instances.iter().flat_map(|v| &v.legs).filter(|l| l.mode == mode.label) {
            if leg.dagger {
                creations += 1;
            } else {
                annihilations += 1;
            }
        }
        if creations == 0 || creations != annihilations {
            return None;
        }
        pairs += creations;
    }
    Some(pairs)
}

fn connected(instances: &[InteractionVertex], virt: &[&Mode]) -> bool {
    let n = instances.len();
    let mut reached = vec![false; n];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if reached[j] {
                continue;
            }
            let linked = virt
                .iter()
                .any(|m| instances[i].touches(&m.label) && instances[j].touches(&m.label));
            if linked {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

fn canonical_key(legs: &[Leg]) -> String {
    let fwd = normal_order(legs);
    let rev = normal_order(&conjugate_legs(legs));
    let render = |ls: &[Leg]| {
        ls.iter()
            .map(|l| format!("{}{}", l.mode, if l.dagger { "+" } else { "" }))
            .collect::<Vec<_>>()
            .join(",")
    };
    std::cmp::min(render(&fwd), render(&rev))
}
