use crate::error::{Error, Result};
use crate::network::Network;

/// `gamma * total * sum d ln d` with `0 ln 0 = 0`.
pub fn entropy_term(demand: &[f64], gamma: f64, total: f64) -> f64 {
    let s: f64 = demand
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum();
    gamma * total * s
}

/// Primal objective of the joint problem: Beckmann potential of the link
/// flows plus the scaled entropy of the normalised demand.
pub fn primal_value(
    net: &Network,
    flows: &[f64],
    demand: &[f64],
    gamma: f64,
    total: f64,
) -> Result<f64> {
    if flows.len() != net.link_count() {
        return Err(Error::Invalid(format!(
            "{} flows for {} links",
            flows.len(),
            net.link_count()
        )));
    }
    let mut beckmann = 0.0;
    for (l, &f) in net.links.iter().zip(flows) {
        // AON sums may leave tiny negative round-off.
        beckmann += l.params.sigma(f.max(0.0))?;
    }
    Ok(beckmann + entropy_term(demand, gamma, total))
}
