/// Query access `Q(y)`: read `y_i` by index without sampling.
pub trait QueryAccess {
    fn len(&self) -> usize;

    fn query(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.query(i)).collect()
    }
}

impl QueryAccess for [f64] {
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }

    #[inline]
    fn query(&self, i: usize) -> f64 {
        self[i]
    }
}

impl QueryAccess for Vec<f64> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    #[inline]
    fn query(&self, i: usize) -> f64 {
        self[i]
    }
}

impl<const N: usize> QueryAccess for [f64; N] {
    fn len(&self) -> usize {
        N
    }

    #[inline]
    fn query(&self, i: usize) -> f64 {
        self[i]
    }
}

impl<T: QueryAccess + ?Sized> QueryAccess for &T {
    fn len(&self) -> usize {
        (**self).len()
    }

    #[inline]
    fn query(&self, i: usize) -> f64 {
        (**self).query(i)
    }
}

/// Query access backed by a closure.
pub struct FnQuery<F> {
    len: usize,
    f: F,
}

impl<F: Fn(usize) -> f64> FnQuery<F> {
    pub fn new(len: usize, f: F) -> Self {
        Self { len, f }
    }
}

impl<F: Fn(usize) -> f64> QueryAccess for FnQuery<F> {
    fn len(&self) -> usize {
        self.len
    }

    #[inline]
    fn query(&self, i: usize) -> f64 {
        (self.f)(i)
    }
}
