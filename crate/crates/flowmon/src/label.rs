use std::fmt;

/// A security label: a 64-bit vector where each bit is one independent
/// secrecy dimension. The all-zero vector is the bottom element ("public"),
/// join is bitwise-or, and the order is bitwise subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Label(pub u64);

impl Label {
    /// The most public level; neutral element of [`Label::join`].
    pub const BOTTOM: Label = Label(0);
    /// Bit 0 set: the single "private" dimension of the default two-point
    /// lattice.
    pub const PRIVATE: Label = Label(1);

    pub fn join(self, other: Label) -> Label {
        Label(self.0 | other.0)
    }

    /// Partial order: true iff `self`'s bit set is a subset of `other`'s.
    pub fn leq(self, other: Label) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_bottom(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "public"),
            1 => write!(f, "private"),
            n => write!(f, "{n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_basics() {
        assert_eq!(Label(0b00).join(Label(0b00)), Label(0b00));
        assert_eq!(Label(0b01).join(Label(0b10)), Label(0b11));
        // public joined with secret is secret
        assert_eq!(Label::BOTTOM.join(Label::PRIVATE), Label::PRIVATE);
    }

    #[test]
    fn leq_basics() {
        assert!(Label::BOTTOM.leq(Label(u64::MAX)));
        assert!(Label::BOTTOM.leq(Label::BOTTOM));
        assert!(!Label(0b11).leq(Label(0b01)));
        assert!(Label(0b01).leq(Label(0b11)));
    }

    #[test]
    fn leq_matches_join_characterization() {
        for a in [0u64, 1, 2, 3, 0b101, u64::MAX] {
            for b in [0u64, 1, 2, 3, 0b110, u64::MAX] {
                let (a, b) = (Label(a), Label(b));
                assert_eq!(a.leq(b), a.join(b) == b);
            }
        }
    }
}
