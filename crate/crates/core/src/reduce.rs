//! Order-independent max-reductions with witnesses.
//!
//! Ties on the value are broken by the smallest witness, so the result of a
//! parallel fold never depends on how the work was partitioned.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Best<T, W> {
    pub value: T,
    pub witness: Option<W>,
}

impl<T: Scalar, W: Ord + Copy> Best<T, W> {
    pub fn none() -> Self {
        Best {
            value: T::neg_infinity(),
            witness: None,
        }
    }

    pub fn of(value: T, witness: W) -> Self {
        Best {
            value,
            witness: Some(witness),
        }
    }

    pub fn offer(&mut self, value: T, witness: W) {
        let other = Best::of(value, witness);
        *self = self.merge(other);
    }

    pub fn merge(self, other: Self) -> Self {
        match (self.witness, other.witness) {
            (None, _) => other,
            (_, None) => self,
            (Some(a), Some(b)) => {
                if other.value > self.value || (other.value == self.value && b < a) {
                    other
                } else {
                    self
                }
            }
        }
    }

    /// The value, or `floor` when nothing was offered or everything was below it.
    pub fn value_or(&self, floor: T) -> T {
        if self.witness.is_some() && self.value > floor {
            self.value
        } else {
            floor
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_order_independent() {
        let a = Best::of(1.0f64, (2, 0));
        let b = Best::of(1.0f64, (1, 5));
        let c = Best::of(0.5f64, (0, 0));
        assert_eq!(a.merge(b).merge(c), c.merge(b).merge(a));
        assert_eq!(a.merge(b).witness, Some((1, 5)));
        assert_eq!(Best::<f64, (usize, usize)>::none().value_or(0.0), 0.0);
    }
}
