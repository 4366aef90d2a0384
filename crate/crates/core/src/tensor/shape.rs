use std::fmt;

use crate::error::{NortError, Result};

/// One of the three tensor modes. Displayed 1-based, indexed 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    First,
    Second,
    Third,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::First, Mode::Second, Mode::Third];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Mode::First => 0,
            Mode::Second => 1,
            Mode::Third => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Mode> {
        match i {
            0 => Ok(Mode::First),
            1 => Ok(Mode::Second),
            2 => Ok(Mode::Third),
            _ => Err(NortError::Range(format!("mode {} not in 1..=3", i + 1))),
        }
    }

    /// Parses a 1-based mode number.
    pub fn from_number(n: usize) -> Result<Mode> {
        if n == 0 {
            return Err(NortError::Range("mode 0 not in 1..=3".into()));
        }
        Mode::from_index(n - 1)
    }

    /// The two remaining modes in increasing order.
    #[inline]
    pub fn others(self) -> [Mode; 2] {
        match self {
            Mode::First => [Mode::Second, Mode::Third],
            Mode::Second => [Mode::First, Mode::Third],
            Mode::Third => [Mode::First, Mode::Second],
        }
    }

    /// The mode that is neither `self` nor `other`. Both must differ.
    #[inline]
    pub fn third(self, other: Mode) -> Mode {
        debug_assert_ne!(self, other);
        Mode::ALL[3 - self.index() - other.index()]
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// Extents (I1, I2, I3) of a 3-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    dims: [usize; 3],
}

impl Shape3 {
    pub fn new(i1: usize, i2: usize, i3: usize) -> Result<Self> {
        if i1 == 0 || i2 == 0 || i3 == 0 {
            return Err(NortError::shape(format!(
                "extents must be positive, got {i1}x{i2}x{i3}"
            )));
        }
        i1.checked_mul(i2)
            .and_then(|p| p.checked_mul(i3))
            .ok_or_else(|| NortError::shape(format!("{i1}x{i2}x{i3} overflows usize")))?;
        Ok(Shape3 { dims: [i1, i2, i3] })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn dim(&self, mode: Mode) -> usize {
        self.dims[mode.index()]
    }

    /// I_x, the number of elements.
    #[inline]
    pub fn numel(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// I_+, the sum of extents.
    #[inline]
    pub fn dim_sum(&self) -> usize {
        self.dims[0] + self.dims[1] + self.dims[2]
    }

    /// Number of columns of the mode unfolding, I_x / I_mode.
    #[inline]
    pub fn unfolded_cols(&self, mode: Mode) -> usize {
        self.numel() / self.dim(mode)
    }

    /// Stride of each mode inside the column index of the `mode` unfolding.
    /// The unfolded mode itself gets stride 0; the remaining modes are laid
    /// out with the lower-numbered one varying fastest.
    #[inline]
    pub fn col_strides(&self, mode: Mode) -> [usize; 3] {
        let [a, b] = mode.others();
        let mut s = [0; 3];
        s[a.index()] = 1;
        s[b.index()] = self.dims[a.index()];
        s
    }

    /// Position of a 0-based index triple in the canonical (mode-1 column-major) layout.
    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    /// Inverse of [`Shape3::linear`].
    #[inline]
    pub fn delinear(&self, mut lin: usize) -> [usize; 3] {
        let i0 = lin % self.dims[0];
        lin /= self.dims[0];
        [i0, lin % self.dims[1], lin / self.dims[1]]
    }

    pub fn check_index(&self, idx: [usize; 3]) -> Result<()> {
        if idx.iter().zip(self.dims.iter()).any(|(&i, &d)| i >= d) {
            return Err(NortError::Range(format!(
                "({}, {}, {}) outside {}",
                idx[0] + 1,
                idx[1] + 1,
                idx[2] + 1,
                self
            )));
        }
        Ok(())
    }

    /// 0-based (row, col) of `idx` in the mode unfolding, unchecked.
    #[inline]
    pub fn unfold_pos(&self, mode: Mode, idx: [usize; 3]) -> (usize, usize) {
        let s = self.col_strides(mode);
        (
            idx[mode.index()],
            idx[0] * s[0] + idx[1] * s[1] + idx[2] * s[2],
        )
    }

    /// Inverse of [`Shape3::unfold_pos`].
    #[inline]
    pub fn fold_pos(&self, mode: Mode, row: usize, col: usize) -> [usize; 3] {
        let [a, b] = mode.others();
        let mut idx = [0; 3];
        idx[mode.index()] = row;
        idx[a.index()] = col % self.dim(a);
        idx[b.index()] = col / self.dim(a);
        idx
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.dims[0], self.dims[1], self.dims[2])
    }
}

/// Maps a 0-based index triple to its 0-based (row, col) in the mode-`mode`
/// unfolding, with bounds checking.
///
/// The column index follows `j = sum_{l != d} i_l * prod_{m < l, m != d} I_m`,
/// which is the 1-based textbook formula shifted to 0-based.
pub fn unfold_index(shape: &Shape3, mode: Mode, idx: [usize; 3]) -> Result<(usize, usize)> {
    shape.check_index(idx)?;
    Ok(shape.unfold_pos(mode, idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: usize, b: usize, c: usize) -> Shape3 {
        Shape3::new(a, b, c).unwrap()
    }

    // Examples below are written 1-based and shifted at the call site.
    fn unfold1(shape: Shape3, mode: usize, idx: [usize; 3]) -> (usize, usize) {
        let (r, c) = unfold_index(
            &shape,
            Mode::from_number(mode).unwrap(),
            [idx[0] - 1, idx[1] - 1, idx[2] - 1],
        )
        .unwrap();
        (r + 1, c + 1)
    }

    #[test]
    fn unfold_index_examples() {
        assert_eq!(unfold1(s(2, 3, 4), 1, [1, 1, 1]), (1, 1));
        assert_eq!(unfold1(s(2, 3, 4), 1, [2, 3, 4]), (2, 12));
        assert_eq!(unfold1(s(2, 3, 4), 2, [2, 3, 4]), (3, 8));
    }

    #[test]
    fn unfold_index_rejects_out_of_range() {
        let err = unfold_index(&s(2, 3, 4), Mode::First, [2, 0, 0]).unwrap_err();
        assert!(matches!(err, NortError::Range(_)));
        assert!(err.to_string().contains("(3, 1, 1)"));
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Shape3::new(0, 2, 2).is_err());
    }

    #[test]
    fn mode_helpers() {
        assert_eq!(Mode::First.third(Mode::Third), Mode::Second);
        assert_eq!(Mode::Second.others(), [Mode::First, Mode::Third]);
        assert!(Mode::from_number(4).is_err());
        assert_eq!(Mode::Third.to_string(), "3");
    }

    #[test]
    fn mode_one_matches_linear_layout() {
        let sh = s(3, 4, 5);
        for lin in 0..sh.numel() {
            let idx = sh.delinear(lin);
            let (r, c) = sh.unfold_pos(Mode::First, idx);
            assert_eq!(r + sh.dim(Mode::First) * c, lin);
        }
    }
}
