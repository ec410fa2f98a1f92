//! Binary morphology on bit-packed rows.
//!
//! A square structuring element of side `2r + 1` is separable, so erosion
//! and dilation are done as a horizontal pass (word shifts within a row)
//! followed by a vertical pass (AND/OR across neighbouring rows). Pixels
//! outside the image count as background.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        Self {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let w = self.bits[y * self.words_per_row + x / 64];
        (w >> (x % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize) {
        self.bits[y * self.words_per_row + x / 64] |= 1u64 << (x % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Set pixels in row-major order as `(x, y)`.
    pub fn ones(&self) -> Vec<(u16, u16)> {
        let mut out = Vec::with_capacity(self.count_ones());
        for y in 0..self.height {
            let row = self.row(y);
            for (wi, &word) in row.iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let b = w.trailing_zeros() as usize;
                    out.push(((wi * 64 + b) as u16, y as u16));
                    w &= w - 1;
                }
            }
        }
        out
    }

    fn row(&self, y: usize) -> &[u64] {
        &self.bits[y * self.words_per_row..(y + 1) * self.words_per_row]
    }

    fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    pub fn erode(&self, radius: usize) -> BitMask {
        let h = self.horizontal(radius, true);
        h.vertical(radius, true)
    }

    pub fn dilate(&self, radius: usize) -> BitMask {
        let h = self.horizontal(radius, false);
        h.vertical(radius, false)
    }

    /// Erosion followed by dilation.
    pub fn open(&self, radius: usize) -> BitMask {
        self.erode(radius).dilate(radius)
    }

    fn horizontal(&self, radius: usize, erode: bool) -> BitMask {
        let mut out = self.clone();
        if radius == 0 {
            return out;
        }
        let n = self.words_per_row;
        let tail = self.tail_mask();
        let mut shifted = vec![0u64; n];
        for y in 0..self.height {
            let src = self.row(y);
            let dst = &mut out.bits[y * n..(y + 1) * n];
            for s in 1..=radius {
                // neighbour at x + s
                shift_down(src, s, &mut shifted);
                combine(dst, &shifted, erode);
                // neighbour at x - s
                shift_up(src, s, &mut shifted);
                if let Some(last) = shifted.last_mut() {
                    *last &= tail;
                }
                combine(dst, &shifted, erode);
            }
        }
        out
    }

    fn vertical(&self, radius: usize, erode: bool) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        let n = self.words_per_row;
        let mut out = BitMask::new(self.width, self.height);
        for y in 0..self.height {
            let touches_border = y < radius || y + radius >= self.height;
            if erode && touches_border {
                continue;
            }
            let lo = y.saturating_sub(radius);
            let hi = (y + radius).min(self.height - 1);
            let dst = &mut out.bits[y * n..(y + 1) * n];
            dst.copy_from_slice(self.row(y));
            for yy in lo..=hi {
                if yy != y {
                    combine(dst, self.row(yy), erode);
                }
            }
        }
        out
    }
}

#[inline]
fn combine(dst: &mut [u64], src: &[u64], and: bool) {
    if and {
        dst.iter_mut().zip(src).for_each(|(d, s)| *d &= s);
    } else {
        dst.iter_mut().zip(src).for_each(|(d, s)| *d |= s);
    }
}

/// `out[x] = src[x + s]`, zero filled past the right edge.
fn shift_down(src: &[u64], s: usize, out: &mut [u64]) {
    let (ws, bs) = (s / 64, s % 64);
    let n = src.len();
    for i in 0..n {
        let lo = src.get(i + ws).copied().unwrap_or(0);
        let hi = src.get(i + ws + 1).copied().unwrap_or(0);
        out[i] = if bs == 0 {
            lo
        } else {
            (lo >> bs) | (hi << (64 - bs))
        };
    }
}

/// `out[x] = src[x - s]`, zero filled past the left edge.
fn shift_up(src: &[u64], s: usize, out: &mut [u64]) {
    let (ws, bs) = (s / 64, s % 64);
    for i in 0..src.len() {
        let lo = if i >= ws { src[i - ws] } else { 0 };
        let prev = if i > ws { src[i - ws - 1] } else { 0 };
        out[i] = if bs == 0 {
            lo
        } else {
            (lo << bs) | (prev >> (64 - bs))
        };
    }
}
