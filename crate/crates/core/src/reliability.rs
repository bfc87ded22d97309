//! Two-coder agreement statistics over nominal codes: percent agreement,
//! Scott's pi, Cohen's kappa and Krippendorff's alpha.
//!
//! Codes are `Option`s; `None` is the missing marker. A unit where either
//! coder is missing is not pairable and is left out of every statistic.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Expected-agreement values within this distance of 1 are treated as the
/// degenerate single-category case.
const DEGENERATE_EPS: f64 = 1e-12;

/// `counts[i][j]` is the number of units coder A coded `categories[i]` and
/// coder B coded `categories[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTable {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionTable {
    /// Builds a table directly from counts. Rows and columns follow `categories`.
    pub fn from_counts(categories: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = categories.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Argument(format!("counts must be {k}x{k}")));
        }
        let n = counts.iter().flatten().sum();
        Ok(Self {
            categories,
            counts,
            n,
        })
    }

    pub fn k(&self) -> usize {
        self.categories.len()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn require_units(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::Undefined(
                "agreement over zero pairable units".into(),
            ));
        }
        Ok(self.n as f64)
    }

    /// Values per category pooled over both coders: row sum plus column sum.
    fn value_counts(&self) -> Vec<u64> {
        self.row_sums()
            .iter()
            .zip(self.col_sums())
            .map(|(r, c)| r + c)
            .collect()
    }
}

/// Cross-tabulates two aligned code sequences.
///
/// Without a fixed category list the categories are the sorted union of
/// codes seen in pairable units. With one, any pairable code outside it is
/// an error.
pub fn confusion<S: AsRef<str>>(
    a: &[Option<S>],
    b: &[Option<S>],
    categories: Option<&[String]>,
) -> Result<ConfusionTable> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "code sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let pairs: Vec<(&str, &str)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((x.as_ref()?.as_ref(), y.as_ref()?.as_ref())))
        .collect();
    let cats: Vec<String> = match categories {
        Some(c) => c.to_vec(),
        None => pairs
            .iter()
            .flat_map(|&(x, y)| [x, y])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect(),
    };
    let index = |s: &str| {
        cats.iter()
            .position(|c| c == s)
            .ok_or_else(|| Error::Argument(format!("code `{s}` not in category set")))
    };
    let k = cats.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (x, y) in pairs {
        counts[index(x)?][index(y)?] += 1;
    }
    ConfusionTable::from_counts(cats, counts)
}

pub fn percent_agreement(t: &ConfusionTable) -> Result<f64> {
    let n = t.require_units()?;
    Ok(t.trace() as f64 / n)
}

fn chance_corrected(p_o: f64, p_e: f64) -> f64 {
    if (1.0 - p_e).abs() < DEGENERATE_EPS {
        if p_o == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

/// Kappa with expected agreement from each coder's own marginals.
pub fn cohens_kappa(t: &ConfusionTable) -> Result<f64> {
    let n = t.require_units()?;
    let p_o = t.trace() as f64 / n;
    let p_e: f64 = t
        .row_sums()
        .iter()
        .zip(t.col_sums())
        .map(|(&r, c)| (r as f64 / n) * (c as f64 / n))
        .sum();
    Ok(chance_corrected(p_o, p_e))
}

/// Pi with expected agreement from the pooled marginals of both coders.
pub fn scotts_pi(t: &ConfusionTable) -> Result<f64> {
    let n = t.require_units()?;
    let p_o = t.trace() as f64 / n;
    let p_e: f64 = t
        .value_counts()
        .iter()
        .map(|&v| {
            let q = v as f64 / (2.0 * n);
            q * q
        })
        .sum();
    Ok(chance_corrected(p_o, p_e))
}

/// Alpha from a table: `1 - D_o / D_e` with the nominal difference function.
pub fn krippendorffs_alpha_from_table(t: &ConfusionTable) -> Result<f64> {
    if t.n < 2 {
        return Err(Error::Undefined(format!(
            "alpha needs at least 2 pairable units, got {}",
            t.n
        )));
    }
    let n = t.n as f64;
    let big_n = 2.0 * n;
    let d_o = (t.n - t.trace()) as f64 / n;
    let values = t.value_counts();
    let same: f64 = values.iter().map(|&v| (v as f64) * (v as f64)).sum();
    // sum over ordered pairs c != k of n_c * n_k
    let cross = big_n * big_n - same;
    let d_e = cross / (big_n * (big_n - 1.0));
    if d_e == 0.0 {
        return Err(Error::Undefined(
            "alpha with zero expected disagreement".into(),
        ));
    }
    Ok(1.0 - d_o / d_e)
}

/// Alpha for two coders over nominal codes. Units missing either code are dropped.
pub fn krippendorffs_alpha<S: AsRef<str>>(a: &[Option<S>], b: &[Option<S>]) -> Result<f64> {
    krippendorffs_alpha_from_table(&confusion(a, b, None)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub n: u64,
    pub categories: Vec<String>,
    pub agreement: f64,
    pub scotts_pi: f64,
    pub cohens_kappa: f64,
    pub krippendorffs_alpha: f64,
}

impl ReliabilityReport {
    /// JSON with every statistic printed to six decimals.
    pub fn to_json(&self) -> String {
        let cats = self
            .categories
            .iter()
            .map(|c| serde_json::to_string(c).expect("string serializes"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "{{\n  \"n\": {},\n  \"categories\": [{}],\n  \"agreement\": {:.6},\n  \"scotts_pi\": {:.6},\n  \"cohens_kappa\": {:.6},\n  \"krippendorffs_alpha\": {:.6}\n}}\n",
            self.n, cats, self.agreement, self.scotts_pi, self.cohens_kappa, self.krippendorffs_alpha
        )
    }
}

/// All four statistics over one shared confusion table.
pub fn reliability_report<S: AsRef<str>>(
    auto: &[Option<S>],
    truth: &[Option<S>],
) -> Result<ReliabilityReport> {
    let t = confusion(auto, truth, None)?;
    Ok(ReliabilityReport {
        n: t.n,
        agreement: percent_agreement(&t)?,
        scotts_pi: scotts_pi(&t)?,
        cohens_kappa: cohens_kappa(&t)?,
        krippendorffs_alpha: krippendorffs_alpha_from_table(&t)?,
        categories: t.categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(s: &[&str]) -> Vec<Option<String>> {
        s.iter().map(|c| Some(c.to_string())).collect()
    }

    fn table(counts: Vec<Vec<u64>>) -> ConfusionTable {
        let cats = (0..counts.len()).map(|i| format!("c{i}")).collect();
        ConfusionTable::from_counts(cats, counts).unwrap()
    }

    #[test]
    fn confusion_basics() {
        let t = confusion(&codes(&["H", "H", "T"]), &codes(&["H", "H", "T"]), None).unwrap();
        assert_eq!(t.categories, ["H", "T"]);
        assert_eq!(t.counts, vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(t.n, 3);
        let t = confusion(&codes(&["H"]), &codes(&["T"]), None).unwrap();
        assert_eq!(t.counts[0][1], 1);
        let empty: Vec<Option<String>> = vec![];
        let t = confusion(&empty, &empty, None).unwrap();
        assert!(matches!(percent_agreement(&t), Err(Error::Undefined(_))));
        assert!(cohens_kappa(&t).is_err() && scotts_pi(&t).is_err());
        assert!(confusion(&codes(&["H"]), &codes(&["H", "T"]), None).is_err());
    }

    #[test]
    fn missing_units_excluded() {
        let a = vec![Some("H"), None, Some("T")];
        let b = vec![Some("H"), Some("T"), None];
        let t = confusion(&a, &b, None).unwrap();
        assert_eq!(t.n, 1);
        assert_eq!(t.categories, ["H"]);
    }

    #[test]
    fn fixed_categories() {
        let cats = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let t = confusion(&codes(&["A"]), &codes(&["B"]), Some(&cats)).unwrap();
        assert_eq!(t.k(), 3);
        assert!(confusion(&codes(&["Z"]), &codes(&["B"]), Some(&cats)).is_err());
    }

    #[test]
    fn agreement_values() {
        assert_eq!(
            percent_agreement(&table(vec![vec![3, 0], vec![0, 3]])).unwrap(),
            1.0
        );
        assert_eq!(
            percent_agreement(&table(vec![vec![0, 3], vec![3, 0]])).unwrap(),
            0.0
        );
        assert!(
            (percent_agreement(&table(vec![vec![20, 5], vec![10, 15]])).unwrap() - 0.7).abs()
                < 1e-15
        );
    }

    #[test]
    fn kappa_values() {
        assert_eq!(
            cohens_kappa(&table(vec![vec![5, 0], vec![0, 5]])).unwrap(),
            1.0
        );
        assert!(
            cohens_kappa(&table(vec![vec![25, 25], vec![25, 25]]))
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!(
            (cohens_kappa(&table(vec![vec![20, 5], vec![10, 15]])).unwrap() - 0.4).abs() < 1e-12
        );
        // single category used by both coders
        assert_eq!(
            cohens_kappa(&table(vec![vec![4, 0], vec![0, 0]])).unwrap(),
            1.0
        );
    }

    #[test]
    fn pi_values() {
        assert_eq!(
            scotts_pi(&table(vec![vec![5, 0], vec![0, 5]])).unwrap(),
            1.0
        );
        assert!(
            scotts_pi(&table(vec![vec![25, 25], vec![25, 25]]))
                .unwrap()
                .abs()
                < 1e-15
        );
        let pi = scotts_pi(&table(vec![vec![20, 5], vec![10, 15]])).unwrap();
        assert!((pi - 0.195 / 0.495).abs() < 1e-12);
        assert!((pi - 0.393939).abs() < 1e-6);
    }

    #[test]
    fn alpha_values() {
        assert_eq!(
            krippendorffs_alpha(&codes(&["H", "T", "H"]), &codes(&["H", "T", "H"])).unwrap(),
            1.0
        );
        let a = krippendorffs_alpha(&codes(&["H", "T"]), &codes(&["T", "H"])).unwrap();
        assert!((a + 0.5).abs() < 1e-12);
        assert!(matches!(
            krippendorffs_alpha(&codes(&["H"]), &codes(&["H"])),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(
            krippendorffs_alpha(&codes(&["H", "H"]), &codes(&["H", "H"])),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn report_identical_and_json() {
        let a = codes(&["head", "none", "hand", "head"]);
        let r = reliability_report(&a, &a).unwrap();
        assert_eq!(r.n, 4);
        assert_eq!(r.categories, ["hand", "head", "none"]);
        for v in [
            r.agreement,
            r.scotts_pi,
            r.cohens_kappa,
            r.krippendorffs_alpha,
        ] {
            assert_eq!(v, 1.0);
        }
        let json = r.to_json();
        assert!(json.contains("\"agreement\": 1.000000"));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["n"], 4);
    }
}
