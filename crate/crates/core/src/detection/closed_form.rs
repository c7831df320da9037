use crate::error::{check_probability, Error, Result};
use crate::sources::NumberStats;

/// Probability that two photons with mode overlap `eta` leave a 50/50
/// beamsplitter through the same port.
pub fn bunching_probability(eta: f64) -> Result<f64> {
    check_probability("eta", eta)?;
    Ok((1.0 + eta) / 2.0)
}

/// Probability of one photon in each output port, with at most two photons
/// per source: `p1⁽¹⁾p1⁽²⁾(1 − P_HOM) + ½p2⁽¹⁾ + ½p2⁽²⁾`.
pub fn expected_coincidence_prob(s1: &NumberStats, s2: &NumberStats, eta: f64) -> Result<f64> {
    NumberStats::new(s1.p1(), s1.p2())?;
    NumberStats::new(s2.p1(), s2.p2())?;
    let p_hom = bunching_probability(eta)?;
    Ok(s1.p1() * s2.p1() * (1.0 - p_hom) + 0.5 * s1.p2() + 0.5 * s2.p2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormG2 {
    pub g2_d: f64,
    pub g2_i: f64,
    pub visibility: f64,
}

/// Normalised zero-delay coincidences for distinguishable and partially
/// indistinguishable photons, and the resulting visibility, given the flux
/// ratio `x = p1⁽¹⁾/p1⁽²⁾` and both heralded autocorrelations.
pub fn closed_form_g2(x: f64, g2n1: f64, g2n2: f64, eta: f64) -> Result<ClosedFormG2> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid("x", format!("{x} must be positive")));
    }
    for (name, g) in [("g2n1", g2n1), ("g2n2", g2n2)] {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::invalid(name, format!("{g} must be >= 0")));
        }
    }
    check_probability("eta", eta)?;
    let pre = 4.0 * x / ((1.0 + x) * (1.0 + x));
    let multi = 0.25 * g2n1 * x + 0.25 * g2n2 / x;
    let g2_d = pre * (0.5 + multi);
    let g2_i = pre * ((1.0 - eta) / 2.0 + multi);
    Ok(ClosedFormG2 {
        g2_d,
        g2_i,
        visibility: 1.0 - g2_i / g2_d,
    })
}

/// Visibility predicted from the mode overlap: `V = 2η / (g2n1·x + g2n2/x + 2)`.
pub fn visibility_from_eta(x: f64, g2n1: f64, g2n2: f64, eta: f64) -> Result<f64> {
    Ok(closed_form_g2(x, g2n1, g2n2, eta)?.visibility)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bunching_limits() {
        assert_eq!(bunching_probability(0.0).unwrap(), 0.5);
        assert_eq!(bunching_probability(1.0).unwrap(), 1.0);
        assert!((bunching_probability(0.892).unwrap() - 0.946).abs() < 1e-12);
        assert!(bunching_probability(1.1).is_err());
    }

    #[test]
    fn coincidence_limits() {
        let a = NumberStats::new(0.03, 0.0).unwrap();
        let b = NumberStats::new(0.02, 0.0).unwrap();
        assert_eq!(expected_coincidence_prob(&a, &b, 1.0).unwrap(), 0.0);
        assert!((expected_coincidence_prob(&a, &b, 0.0).unwrap() - 0.0003).abs() < 1e-15);
    }

    #[test]
    fn perfect_single_photons_give_unit_visibility() {
        for x in [0.3, 1.0, 2.5] {
            let c = closed_form_g2(x, 0.0, 0.0, 1.0).unwrap();
            assert!((c.visibility - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(closed_form_g2(0.0, 0.1, 0.1, 0.5).is_err());
        assert!(closed_form_g2(1.0, -0.1, 0.1, 0.5).is_err());
        assert!(closed_form_g2(1.0, 0.1, 0.1, 1.5).is_err());
    }

    #[test]
    fn visibility_intercept_without_node1_multiphotons() {
        let v = visibility_from_eta(1.3, 0.0, 0.1, 0.86).unwrap();
        assert!((v - 2.0 * 0.86 / (0.1 / 1.3 + 2.0)).abs() < 1e-12);
        assert!((v - 0.828).abs() < 1e-3);
    }
}
