use super::{transfer_function, Branch, Element, LadderNetwork};
use crate::error::{Error, Result};
use crate::lm::levenberg_marquardt;

/// Parasitics that reproduce a pair of isolation targets.
#[derive(Debug, Clone)]
pub struct ParasiticFit {
    /// Off-state leakage of every switch, Ω.
    pub switch_leakage: f64,
    /// Capacitance bridging the whole ladder, F.
    pub bridge_capacitance: f64,
    /// Leakage held fixed across every shunt capacitor, Ω.
    pub shunt_leakage: f64,
    /// `(frequency, target dB, achieved dB)` for each target.
    pub achieved: Vec<(f64, f64, f64)>,
    pub network: LadderNetwork,
}

impl ParasiticFit {
    pub fn max_error_db(&self) -> f64 {
        self.achieved.iter().map(|(_, t, a)| (a - t).abs()).fold(0.0, f64::max)
    }
}

fn with_parasitics(base: &LadderNetwork, r_off: f64, c_bridge: f64, r_shunt: f64) -> LadderNetwork {
    let mut n = base.clone();
    for e in &mut n.elements {
        match e {
            Element::Switch { off_resistance, .. } => *off_resistance = Some(r_off),
            Element::Shunt(b) if b.capacitance.is_some() => b.resistance = Some(r_shunt),
            _ => {}
        }
    }
    n.bridge = Some(Branch::capacitor(c_bridge));
    n
}

/// Finds a switch off-state leakage and a ladder bridging capacitance such
/// that the isolation of `base` (switches open) hits `dc_target` dB at dc and
/// `hf_target` dB at `hf_frequency`, with `shunt_leakage` placed across every
/// shunt capacitor.
///
/// The dc isolation is set by the resistive divider of switch and shunt
/// leakage, the high-frequency value mostly by the bridge, so the two
/// unknowns are well separated.
pub fn fit_parasitics(
    base: &LadderNetwork,
    dc_target: f64,
    hf_target: f64,
    hf_frequency: f64,
    shunt_leakage: f64,
) -> Result<ParasiticFit> {
    if !(shunt_leakage > 0.0 && shunt_leakage.is_finite()) {
        return Err(Error::InvalidParameter("shunt leakage must be > 0".into()));
    }
    if !(hf_frequency > 0.0) {
        return Err(Error::InvalidParameter("high-frequency target needs f > 0".into()));
    }
    let base = base.with_switches(false);
    if !base.elements.iter().any(|e| matches!(e, Element::Switch { .. })) {
        return Err(Error::InvalidParameter("network has no switches".into()));
    }
    let targets = [(0.0, dc_target), (hf_frequency, hf_target)];
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let n = with_parasitics(&base, p[0].exp(), p[1].exp(), shunt_leakage);
        targets
            .iter()
            .map(|&(f, t)| Ok(transfer_function(&n, f)?.isolation_db() - t))
            .collect()
    };
    let p0 = [(100.0 * shunt_leakage).ln(), (0.1e-12f64).ln()];
    let res = levenberg_marquardt(residuals, &p0, 200)?;
    let (r_off, c_b) = (res.params[0].exp(), res.params[1].exp());
    let network = with_parasitics(&base, r_off, c_b, shunt_leakage);
    let achieved = targets
        .iter()
        .map(|&(f, t)| Ok((f, t, transfer_function(&network, f)?.isolation_db())))
        .collect::<Result<Vec<_>>>()?;
    let fit = ParasiticFit {
        switch_leakage: r_off,
        bridge_capacitance: c_b,
        shunt_leakage,
        achieved,
        network,
    };
    if fit.max_error_db() > 1.0 {
        return Err(Error::Fit(format!(
            "parasitic fit misses a target by {:.2} dB",
            fit.max_error_db()
        )));
    }
    Ok(fit)
}
