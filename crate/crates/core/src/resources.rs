use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// FPGA resource counts: flip-flops, LUTs, 36Kb block RAMs, UltraRAMs and DSP slices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceVector {
    pub ff: u64,
    pub lut: u64,
    pub bram: u64,
    pub uram: u64,
    pub dsp: u64,
}

/// Resource kinds in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Ff,
    Lut,
    Bram,
    Uram,
    Dsp,
}

impl Resource {
    pub const ALL: [Resource; 5] = [
        Resource::Ff,
        Resource::Lut,
        Resource::Bram,
        Resource::Uram,
        Resource::Dsp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Resource::Ff => "ff",
            Resource::Lut => "lut",
            Resource::Bram => "bram",
            Resource::Uram => "uram",
            Resource::Dsp => "dsp",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        ff: 0,
        lut: 0,
        bram: 0,
        uram: 0,
        dsp: 0,
    };

    pub fn new(ff: u64, lut: u64, bram: u64, uram: u64, dsp: u64) -> Self {
        ResourceVector {
            ff,
            lut,
            bram,
            uram,
            dsp,
        }
    }

    pub fn get(&self, r: Resource) -> u64 {
        match r {
            Resource::Ff => self.ff,
            Resource::Lut => self.lut,
            Resource::Bram => self.bram,
            Resource::Uram => self.uram,
            Resource::Dsp => self.dsp,
        }
    }

    pub fn get_mut(&mut self, r: Resource) -> &mut u64 {
        match r {
            Resource::Ff => &mut self.ff,
            Resource::Lut => &mut self.lut,
            Resource::Bram => &mut self.bram,
            Resource::Uram => &mut self.uram,
            Resource::Dsp => &mut self.dsp,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    /// Component-wise `self <= other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        Resource::ALL.iter().all(|&r| self.get(r) <= other.get(r))
    }

    /// Component-wise maximum.
    pub fn max(&self, other: &ResourceVector) -> ResourceVector {
        let mut out = *self;
        for r in Resource::ALL {
            *out.get_mut(r) = self.get(r).max(other.get(r));
        }
        out
    }

    /// Component-wise saturating difference.
    pub fn saturating_sub(&self, other: &ResourceVector) -> ResourceVector {
        let mut out = *self;
        for r in Resource::ALL {
            *out.get_mut(r) = self.get(r).saturating_sub(other.get(r));
        }
        out
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, rhs: ResourceVector) -> ResourceVector {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: ResourceVector) {
        for r in Resource::ALL {
            *self.get_mut(r) += rhs.get(r);
        }
    }
}

impl Sub for ResourceVector {
    type Output = ResourceVector;

    /// Panics on underflow, like integer subtraction in debug builds.
    fn sub(self, rhs: ResourceVector) -> ResourceVector {
        let mut out = self;
        for r in Resource::ALL {
            *out.get_mut(r) = self.get(r) - rhs.get(r);
        }
        out
    }
}

impl Mul<u64> for ResourceVector {
    type Output = ResourceVector;

    fn mul(self, k: u64) -> ResourceVector {
        let mut out = self;
        for r in Resource::ALL {
            *out.get_mut(r) *= k;
        }
        out
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::ZERO, |acc, v| acc + v)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{ff: {}, lut: {}, bram: {}, uram: {}, dsp: {}}}",
            self.ff, self.lut, self.bram, self.uram, self.dsp
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_componentwise() {
        let a = ResourceVector::new(1, 2, 3, 4, 5);
        let b = ResourceVector::new(10, 20, 30, 40, 50);
        assert_eq!(a + b, ResourceVector::new(11, 22, 33, 44, 55));
        assert_eq!(a * 3, ResourceVector::new(3, 6, 9, 12, 15));
        assert_eq!(b - a, ResourceVector::new(9, 18, 27, 36, 45));
        assert!(a.fits_within(&b));
        assert!(!b.fits_within(&a));
        assert!(!ResourceVector::new(0, 0, 0, 0, 6).fits_within(&a));
    }

    #[test]
    fn sum_of_empty_is_zero() {
        let v: ResourceVector = std::iter::empty().sum();
        assert!(v.is_zero());
    }
}
