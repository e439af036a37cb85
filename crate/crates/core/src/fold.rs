//! Fold selection over 1-based instance indices.

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldQuery {
    pub fold: usize,
    pub numfolds: usize,
    pub invert: bool,
}

impl FoldQuery {
    pub fn new(fold: usize, numfolds: usize) -> Self {
        FoldQuery {
            fold,
            numfolds,
            invert: false,
        }
    }

    pub fn inverted(self) -> Self {
        FoldQuery {
            invert: true,
            ..self
        }
    }

    /// `fold=2&numfolds=5[&invert=true]`
    pub fn to_query(&self) -> String {
        let mut q = format!("fold={}&numfolds={}", self.fold, self.numfolds);
        if self.invert {
            q.push_str("&invert=true");
        }
        q
    }

    pub fn describe(&self) -> String {
        if self.invert {
            format!("all but fold {} of {}", self.fold, self.numfolds)
        } else {
            format!("fold {} of {}", self.fold, self.numfolds)
        }
    }

    /// Builds a query from raw `fold`, `numfolds` and `invert` arguments;
    /// `None` when none is present.
    pub fn from_args(
        fold: Option<&str>,
        numfolds: Option<&str>,
        invert: Option<&str>,
    ) -> Result<Option<Self>, Error> {
        let positive = |name: &str, s: &str| -> Result<usize, Error> {
            s.parse::<usize>().ok().filter(|n| *n >= 1).ok_or_else(|| {
                Error::bad_request(format!("{name} must be an integer ≥ 1, got {s:?}"))
            })
        };
        match (fold, numfolds) {
            (None, None) if invert.is_none() => Ok(None),
            (Some(f), Some(n)) => {
                let invert = match invert {
                    None | Some("false") => false,
                    Some("true") => true,
                    Some(other) => {
                        return Err(Error::bad_request(format!(
                            "invert must be true or false, got {other:?}"
                        )))
                    }
                };
                Ok(Some(FoldQuery {
                    fold: positive("fold", f)?,
                    numfolds: positive("numfolds", n)?,
                    invert,
                }))
            }
            _ => Err(Error::bad_request(
                "fold and numfolds must be given together",
            )),
        }
    }
}

/// Fold `i` of `k` over `n` instances is `{i, i+k, i+2k, …} ∩ [1, n]`,
/// ascending; `invert` selects the complement. With more folds than
/// instances the surplus folds are empty.
pub fn select_fold(n: usize, q: &FoldQuery) -> Result<Vec<usize>, Error> {
    if q.fold < 1 || q.fold > q.numfolds {
        return Err(Error::bad_request(format!(
            "fold {} is outside 1..={}",
            q.fold, q.numfolds
        )));
    }
    Ok((1..=n)
        .filter(|&i| (i >= q.fold && (i - q.fold) % q.numfolds == 0) != q.invert)
        .collect())
}
