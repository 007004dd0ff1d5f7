use num_complex::Complex64 as C64;

use super::{conjugate_legs, normal_order, EffectiveProcess, Elimination, InteractionVertex, Mode, PumpReduction};
use crate::error::{Error, Result};

const MAX_PARTS: usize = 20;

/// Composes intrinsic vertices into one effective process by contracting
/// every leg on the virtual modes.
///
/// The first vertex keeps its written orientation; the others are taken in
/// whichever orientation (as written or h.c.) balances the creation and
/// annihilation legs on every virtual mode, searched in a fixed order. Each
/// contracted pair on virtual mode `j` divides the coupling by `lambdas[j]`.
pub fn synthesize_effective(
    vertices: &[InteractionVertex],
    virtual_modes: &[Mode],
    lambdas: &[C64],
) -> Result<EffectiveProcess> {
    for v in vertices {
        v.validate()?;
    }
    let parts: Vec<EffectiveProcess> = vertices.iter().map(EffectiveProcess::lift).collect();
    synthesize_staged(&parts, virtual_modes, lambdas)
}

/// Same as [`synthesize_effective`] but accepts already-synthesized
/// processes, so virtual modes can be eliminated one at a time.
pub fn synthesize_staged(
    parts: &[EffectiveProcess],
    virtual_modes: &[Mode],
    lambdas: &[C64],
) -> Result<EffectiveProcess> {
    if virtual_modes.is_empty() {
        return Err(Error::Synthesis("no virtual modes given".into()));
    }
    if lambdas.len() != virtual_modes.len() {
        return Err(Error::Synthesis(format!(
            "{} virtual modes but {} lambdas",
            virtual_modes.len(),
            lambdas.len()
        )));
    }
    if parts.is_empty() || parts.len() > MAX_PARTS {
        return Err(Error::Synthesis(format!(
            "need between 1 and {MAX_PARTS} source vertices, got {}",
            parts.len()
        )));
    }
    for (mode, lambda) in virtual_modes.iter().zip(lambdas) {
        if lambda.norm() == 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::Singularity(format!(
                "Λ for virtual mode `{}` is {lambda}",
                mode.label
            )));
        }
    }
    let labels: Vec<&str> = virtual_modes.iter().map(|m| m.label.as_str()).collect();
    for (i, label) in labels.iter().enumerate() {
        if labels[..i].contains(label) {
            return Err(Error::Synthesis(format!("virtual mode `{label}` listed twice")));
        }
        let touching = parts.iter().filter(|p| p.legs.iter().any(|l| l.mode == *label)).count();
        if touching < 2 {
            return Err(Error::Synthesis(format!(
                "dangling virtual leg: `{label}` appears in {touching} vertex(es), need at least 2"
            )));
        }
    }
    for (i, part) in parts.iter().enumerate() {
        if !part.legs.iter().any(|l| labels.contains(&l.mode.as_str())) {
            return Err(Error::Synthesis(format!(
                "source {i} ({}) shares no virtual mode",
                part.monomial()
            )));
        }
    }

    let mask = find_orientation(parts, &labels).ok_or_else(|| {
        let unbalanced = labels
            .iter()
            .find(|l| {
                let (c, a) = count_virtual(parts, 0, l);
                c != a
            })
            .unwrap_or(&labels[0]);
        Error::Synthesis(format!(
            "dangling virtual leg: no orientation pairs every creation with an annihilation on `{unbalanced}`"
        ))
    })?;

    let mut numerator = C64::new(1.0, 0.0);
    let mut eliminated = Vec::new();
    let mut sources = Vec::new();
    let mut pumped = Vec::new();
    let mut external = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let flip = mask >> i & 1 == 1;
        let (num, legs) = if flip {
            (part.numerator().conj(), conjugate_legs(&part.legs))
        } else {
            (part.numerator(), part.legs.clone())
        };
        numerator *= num;
        eliminated.extend(part.eliminated.iter().cloned());
        pumped.extend(part.pumped.iter().cloned());
        sources.extend(
            part.source_vertices
                .iter()
                .map(|v| if flip { v.flipped() } else { v.clone() }),
        );
        external.extend(legs.into_iter().filter(|l| !labels.contains(&l.mode.as_str())));
    }
    for (mode, lambda) in virtual_modes.iter().zip(lambdas) {
        let (creations, _) = count_virtual(parts, mask, &mode.label);
        for _ in 0..creations {
            eliminated.push(Elimination {
                mode: mode.label.clone(),
                lambda: *lambda,
            });
        }
    }
    if external.is_empty() {
        return Err(Error::Synthesis("composition leaves no external legs".into()));
    }

    let lambda_total = eliminated.iter().fold(C64::new(1.0, 0.0), |acc, e| acc * e.lambda);
    Ok(EffectiveProcess {
        g_eff: numerator / lambda_total,
        legs: normal_order(&external),
        non_hermitian: lambda_total.im.abs() > 1e-12 * lambda_total.norm(),
        eliminated,
        source_vertices: sources,
        hermitian_pair: true,
        pumped,
    })
}

/// (creation, annihilation) leg counts on `label` under an orientation mask.
fn count_virtual(parts: &[EffectiveProcess], mask: u32, label: &str) -> (usize, usize) {
    let mut creations = 0;
    let mut annihilations = 0;
    for (i, part) in parts.iter().enumerate() {
        let flip = mask >> i & 1 == 1;
        for leg in part.legs.iter().filter(|l| l.mode == label) {
            if leg.dagger != flip {
                creations += 1;
            } else {
                annihilations += 1;
            }
        }
    }
    (creations, annihilations)
}

fn find_orientation(parts: &[EffectiveProcess], labels: &[&str]) -> Option<u32> {
    // bit 0 stays clear: the first source fixes the overall orientation
    let n = parts.len() as u32;
    (0..1u32 << (n - 1)).map(|m| m << 1).find(|&mask| {
        labels.iter().all(|l| {
            let (c, a) = count_virtual(parts, mask, l);
            c == a
        })
    })
}

/// Replaces every leg on the classical pump by `√n_pump`.
///
/// The coupling picks up `n_pump^{k/2}` for `k` removed legs. All pump legs
/// must share one orientation.
pub fn classical_pump_reduce(process: &EffectiveProcess, pump: &Mode, n_pump: f64) -> Result<EffectiveProcess> {
    if !(n_pump >= 0.0) || !n_pump.is_finite() {
        return Err(Error::Domain(format!("pump photon number must be >= 0, got {n_pump}")));
    }
    let pump_legs: Vec<_> = process.legs.iter().filter(|l| l.mode == pump.label).collect();
    if pump_legs.iter().any(|l| l.dagger) && pump_legs.iter().any(|l| !l.dagger) {
        return Err(Error::Structural(format!(
            "pump `{}` appears with both orientations in {}",
            pump.label,
            process.monomial()
        )));
    }
    let k = pump_legs.len();
    let mut out = process.clone();
    out.g_eff *= n_pump.powf(0.5 * k as f64);
    out.legs.retain(|l| l.mode != pump.label);
    if k > 0 {
        out.pumped.push(PumpReduction {
            mode: pump.label.clone(),
            n_pump,
            legs_removed: k,
        });
    }
    Ok(out)
}
