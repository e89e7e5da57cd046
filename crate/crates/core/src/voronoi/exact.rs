//! Exact sums and products of doubles as nonoverlapping expansions
//! (components sorted by increasing magnitude, zeros removed).

use alloc::vec;
use alloc::vec::Vec;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let x = a + b;
    let bv = x - a;
    let av = x - bv;
    (x, (a - av) + (b - bv))
}

fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let x = a + b;
    (x, b - (x - a))
}

fn two_product(a: f64, b: f64) -> (f64, f64) {
    let x = a * b;
    (x, libm::fma(a, b, -x))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expansion(Vec<f64>);

impl Expansion {
    pub fn from_f64(a: f64) -> Expansion {
        Expansion(if a == 0.0 { vec![] } else { vec![a] })
    }

    pub fn diff(a: f64, b: f64) -> Expansion {
        let (x, y) = two_sum(a, -b);
        Expansion([y, x].into_iter().filter(|&c| c != 0.0).collect())
    }

    pub fn product(a: f64, b: f64) -> Expansion {
        let (x, y) = two_product(a, b);
        Expansion([y, x].into_iter().filter(|&c| c != 0.0).collect())
    }

    fn grow(&self, b: f64) -> Expansion {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        let mut q = b;
        for &e in &self.0 {
            let (s, h) = two_sum(q, e);
            if h != 0.0 {
                out.push(h);
            }
            q = s;
        }
        if q != 0.0 {
            out.push(q);
        }
        Expansion(out)
    }

    pub fn add(&self, other: &Expansion) -> Expansion {
        other.0.iter().fold(self.clone(), |acc, &b| acc.grow(b))
    }

    pub fn neg(&self) -> Expansion {
        Expansion(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, other: &Expansion) -> Expansion {
        self.add(&other.neg())
    }

    pub fn scale(&self, b: f64) -> Expansion {
        let Some((&first, rest)) = self.0.split_first() else { return Expansion::default() };
        let mut out = Vec::with_capacity(2 * self.0.len());
        let (mut q, h) = two_product(first, b);
        if h != 0.0 {
            out.push(h);
        }
        for &e in rest {
            let (t1, t0) = two_product(e, b);
            let (s, h) = two_sum(q, t0);
            if h != 0.0 {
                out.push(h);
            }
            let (s2, h) = fast_two_sum(t1, s);
            if h != 0.0 {
                out.push(h);
            }
            q = s2;
        }
        if q != 0.0 {
            out.push(q);
        }
        Expansion(out)
    }

    pub fn mul(&self, other: &Expansion) -> Expansion {
        other.0.iter().fold(Expansion::default(), |acc, &b| acc.add(&self.scale(b)))
    }

    /// Sign of the exact value: the sign of the largest component.
    pub fn sign(&self) -> i8 {
        match self.0.last() {
            Some(&c) if c > 0.0 => 1,
            Some(&c) if c < 0.0 => -1,
            _ => 0,
        }
    }

    #[cfg(test)]
    /// Nearest double, roughly.
    pub fn estimate(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub type Row = [Expansion; 3];

pub fn det3(r: &[Row; 3]) -> Expansion {
    let minor = |a: usize, b: usize| r[1][a].mul(&r[2][b]).sub(&r[1][b].mul(&r[2][a]));
    r[0][0].mul(&minor(1, 2)).sub(&r[0][1].mul(&minor(0, 2))).add(&r[0][2].mul(&minor(0, 1)))
}
