use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Redundancy of grammatical cues with lexical semantics: the share of
/// clauses recoverable from meaning alone (`lexical`), plus the share of the
/// remainder that the human baseline still resolves.
///
/// `combined = u + l (1 - u)` where `u` is the human (or upper-bound)
/// accuracy and `l` the lexical-only accuracy.
pub fn combined_redundancy(upper: f64, lexical: f64) -> Result<f64, StatsError> {
    for (name, value) in [("upper", upper), ("lexical", lexical)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(StatsError::Range { name, value });
        }
    }
    Ok(upper + lexical * (1.0 - upper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAccuracy {
    pub language: String,
    pub cased: bool,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseComparison {
    /// Mean over languages of the per-language mean accuracy.
    pub cased_mean: f64,
    pub uncased_mean: f64,
    pub difference: f64,
    /// Least-squares fit of language accuracy on the case indicator.
    pub intercept: f64,
    pub slope: f64,
    pub cased_languages: usize,
    pub uncased_languages: usize,
}

/// Compares classifier accuracy between languages with and without case
/// marking. Corpora of the same language are averaged first so that
/// languages with many treebanks do not dominate.
pub fn case_group_comparison(rows: &[CorpusAccuracy]) -> Result<CaseComparison, StatsError> {
    let mut by_lang: BTreeMap<&str, (bool, f64, usize)> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.accuracy) {
            return Err(StatsError::Range {
                name: "accuracy",
                value: r.accuracy,
            });
        }
        let e = by_lang.entry(&r.language).or_insert((r.cased, 0.0, 0));
        if e.0 != r.cased {
            return Err(StatsError::InconsistentCase(r.language.clone()));
        }
        e.1 += r.accuracy;
        e.2 += 1;
    }
    let means = |cased: bool| -> Vec<f64> {
        by_lang
            .values()
            .filter(|v| v.0 == cased)
            .map(|v| v.1 / v.2 as f64)
            .collect()
    };
    let cased = means(true);
    let uncased = means(false);
    if cased.is_empty() {
        return Err(StatsError::EmptyGroup("case-marked"));
    }
    if uncased.is_empty() {
        return Err(StatsError::EmptyGroup("unmarked"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cased_mean = mean(&cased);
    let uncased_mean = mean(&uncased);
    // with a single binary regressor OLS reduces to the two group means
    Ok(CaseComparison {
        cased_mean,
        uncased_mean,
        difference: cased_mean - uncased_mean,
        intercept: uncased_mean,
        slope: cased_mean - uncased_mean,
        cased_languages: cased.len(),
        uncased_languages: uncased.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(language: &str, cased: bool, accuracy: f64) -> CorpusAccuracy {
        CorpusAccuracy {
            language: language.into(),
            cased,
            accuracy,
        }
    }

    #[test]
    fn combined_examples() {
        // .866 + .867 * .134
        assert!((combined_redundancy(0.866, 0.867).unwrap() - 0.982_178).abs() < 1e-9);
        assert_eq!(combined_redundancy(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(combined_redundancy(0.0, 0.3).unwrap(), 0.3);
        assert!(matches!(combined_redundancy(1.2, 0.3), Err(StatsError::Range { name: "upper", .. })));
        assert!(matches!(combined_redundancy(0.5, -0.1), Err(StatsError::Range { name: "lexical", .. })));
    }

    #[test]
    fn simple_difference() {
        let c = case_group_comparison(&[row("de", true, 0.9), row("ru", true, 0.88), row("en", false, 0.82)])
            .unwrap();
        assert!((c.difference - 0.07).abs() < 1e-12);
        assert!((c.intercept - 0.82).abs() < 1e-12);
        assert_eq!((c.cased_languages, c.uncased_languages), (2, 1));
    }

    #[test]
    fn languages_are_averaged_first() {
        let c = case_group_comparison(&[
            row("de", true, 0.90),
            row("de", true, 0.85),
            row("en", false, 0.80),
        ])
        .unwrap();
        assert!((c.cased_mean - 0.875).abs() < 1e-12);
        assert_eq!(c.cased_languages, 1);
    }

    #[test]
    fn group_errors() {
        assert_eq!(
            case_group_comparison(&[row("de", true, 0.9)]),
            Err(StatsError::EmptyGroup("unmarked"))
        );
        assert_eq!(
            case_group_comparison(&[row("en", false, 0.9)]),
            Err(StatsError::EmptyGroup("case-marked"))
        );
        assert_eq!(
            case_group_comparison(&[row("de", true, 0.9), row("de", false, 0.8)]),
            Err(StatsError::InconsistentCase("de".into()))
        );
    }

    proptest! {
        #[test]
        fn combined_is_monotone(u in 0.0f64..1.0, l in 0.0f64..1.0, du in 0.0f64..0.5, dl in 0.0f64..0.5) {
            let base = combined_redundancy(u, l).unwrap();
            let u2 = (u + du).min(1.0);
            let l2 = (l + dl).min(1.0);
            prop_assert!(combined_redundancy(u2, l).unwrap() >= base - 1e-15);
            prop_assert!(combined_redundancy(u, l2).unwrap() >= base - 1e-15);
            prop_assert!(base >= u.max(l) - 1e-15 && base <= 1.0);
        }
    }
}
