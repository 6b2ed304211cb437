use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of subsystem dimensions with optional unique labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceShape {
    factors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl SpaceShape {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidShape("no factors".into()));
        }
        if let Some(bad) = factors.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidShape(format!("factor dimension {bad}")));
        }
        Ok(Self { factors, labels: None })
    }

    pub fn labeled(factors: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let mut shape = Self::new(factors)?;
        if labels.len() != shape.factors.len() {
            return Err(Error::InvalidShape(format!(
                "{} labels for {} factors",
                labels.len(),
                shape.factors.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidShape(format!("duplicate label `{l}`")));
            }
        }
        shape.labels = Some(labels);
        Ok(shape)
    }

    /// Single-factor shape.
    pub fn qudit(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    /// Concatenation of factor lists. Labels survive only when both sides
    /// carry them.
    pub fn concat(&self, other: &SpaceShape) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => {
                if let Some(dup) = a.iter().find(|l| b.contains(l)) {
                    return Err(Error::LabelCollision(dup.clone()));
                }
                Some(a.iter().chain(b).cloned().collect())
            }
            _ => None,
        };
        Ok(Self { factors, labels })
    }

    /// Shape restricted to `idx` (in the listed order).
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            factors: idx.iter().map(|&i| self.factors[i]).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Replaces factors `acting` by `replacement`, inserted at the position
    /// of the lowest replaced factor.
    pub(crate) fn substitute(&self, acting: &[usize], replacement: &SpaceShape) -> Self {
        let rest: Vec<usize> = (0..self.len()).filter(|f| !acting.contains(f)).collect();
        let min_acting = acting.iter().copied().min().unwrap_or(0);
        let pos = rest.iter().filter(|&&f| f < min_acting).count();
        let mut factors: Vec<usize> = rest.iter().map(|&f| self.factors[f]).collect();
        factors.splice(pos..pos, replacement.factors.iter().copied());
        let labels = match (&self.labels, &replacement.labels) {
            (Some(own), Some(new)) => {
                let mut l: Vec<String> = rest.iter().map(|&f| own[f].clone()).collect();
                l.splice(pos..pos, new.iter().cloned());
                let unique = l.iter().enumerate().all(|(i, x)| !l[..i].contains(x));
                unique.then_some(l)
            }
            _ => None,
        };
        Self { factors, labels }
    }

    /// Validates a subsystem selection: nonempty, in range, no duplicates.
    pub fn check_selection(&self, idx: &[usize]) -> Result<()> {
        if idx.is_empty() {
            return Err(Error::EmptySelection);
        }
        for (i, &f) in idx.iter().enumerate() {
            if f >= self.len() {
                return Err(Error::IndexOutOfRange { index: f, len: self.len() });
            }
            if idx[..i].contains(&f) {
                return Err(Error::Overlap(f));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for SpaceShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_factor() {
        assert!(SpaceShape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(SpaceShape::labeled(vec![2, 2], vec!["A".into(), "A".into()]).is_err());
    }

    #[test]
    fn concat_label_collision() {
        let a = SpaceShape::labeled(vec![2], vec!["A".into()]).unwrap();
        let b = SpaceShape::labeled(vec![3], vec!["A".into()]).unwrap();
        assert_eq!(a.concat(&b), Err(Error::LabelCollision("A".into())));
    }

    #[test]
    fn substitute_inserts_at_lowest_position() {
        let s = SpaceShape::new(vec![2, 3, 4]).unwrap();
        let r = SpaceShape::new(vec![5, 6]).unwrap();
        assert_eq!(s.substitute(&[1], &r).factors(), &[2, 5, 6, 4]);
        assert_eq!(s.substitute(&[2, 0], &r).factors(), &[5, 6, 3]);
    }
}
