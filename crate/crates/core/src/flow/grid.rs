/// A 2D array of `nx * ny` values surrounded by one ghost layer.
///
/// Storage is row-major with `x` fastest. Index `(i, j)` is valid for
/// `-1 <= i <= nx` and `-1 <= j <= ny`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2 {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl Field2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; (nx + 2) * (ny + 2)],
        }
    }

    pub fn filled(nx: usize, ny: usize, value: f64) -> Self {
        Self {
            nx,
            ny,
            data: vec![value; (nx + 2) * (ny + 2)],
        }
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Distance between vertically adjacent entries in [`Self::raw`].
    #[inline]
    pub fn stride(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize && j >= -1 && j <= self.ny as isize);
        (j + 1) as usize * (self.nx + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: isize, j: isize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    /// Padded storage, including ghosts.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copies the interior into `out` in row-major order (`j` outer).
    pub fn interior_to(&self, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.nx * self.ny);
        for j in 0..self.ny as isize {
            let k = self.idx(0, j);
            out.extend_from_slice(&self.data[k..k + self.nx]);
        }
    }

    pub fn interior(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.interior_to(&mut out);
        out
    }

    /// Overwrites the interior from a row-major slice of length `nx * ny`.
    pub fn set_interior(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.nx * self.ny, "interior length mismatch");
        for j in 0..self.ny {
            let k = self.idx(0, j as isize);
            self.data[k..k + self.nx].copy_from_slice(&src[j * self.nx..(j + 1) * self.nx]);
        }
    }

    /// Maximum absolute interior value.
    pub fn max_abs_interior(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.ny as isize {
            let k = self.idx(0, j);
            for &x in &self.data[k..k + self.nx] {
                m = m.max(x.abs());
            }
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_round_trip_skips_ghosts() {
        let mut f = Field2::filled(3, 2, -7.0);
        let src: Vec<f64> = (0..6).map(f64::from).collect();
        f.set_interior(&src);
        assert_eq!(f.interior(), src);
        assert_eq!(f.get(-1, -1), -7.0);
        assert_eq!(f.get(2, 1), 5.0);
        assert_eq!(f.idx(0, 1) - f.idx(0, 0), f.stride());
    }
}
