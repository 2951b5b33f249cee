//! Prime-order subgroups of short-Weierstrass curves, plus the associated
//! value function used by the MQV and SM2 key exchanges.
//!
//! Three backends share one interface:
//!
//! - `Real`: a standardized 256-bit curve (NIST P-256 or the SM2 curve),
//! - `Toy`: y^2 = x^3 + x + 27 over F_63949 with a 31963-element subgroup
//!   (cofactor 2), small enough to brute-force discrete logs in tests,
//! - `FixedLsbMock`: the toy group with an x-coordinate accessor that pins
//!   the low `l` bits to a constant, which makes the associated value
//!   function constant. Useful only for demonstrating what goes wrong when
//!   avf degenerates on an adversarially chosen group representation.
//!
//! The associated value function truncates the x-coordinate:
//! `avf(P) = 2^l + (P.x mod 2^l)`, where the MQV policy uses
//! l = ceil(bitlen(q)/2) and the SM2 policy uses l = floor(bitlen(q)/2).
//! Outputs therefore land in [2^l, 2^(l+1) - 1] and the leading bit is
//! always set.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("point ({x}, {y}) is not on curve {curve}")]
    OffCurve { curve: String, x: String, y: String },
    #[error("element of {found} used in an operation on {expected}")]
    MixedCurve { expected: String, found: String },
    #[error("the identity element has no x-coordinate")]
    IdentityXCoordinate,
    #[error("unknown curve `{0}`")]
    UnknownCurve(String),
    #[error("scalar {0} has no inverse modulo the group order")]
    NonInvertibleScalar(String),
    #[error("invalid element encoding ({0})")]
    InvalidEncoding(String),
}

/// Which arithmetic sits behind a [`Group`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Real,
    Toy,
    /// Toy arithmetic, but `x_coordinate` reports the low `l` bits pinned
    /// to a constant.
    FixedLsbMock,
}

/// Truncation policy for the associated value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvfPolicy {
    /// l = ceil(bitlen(q) / 2)
    Mqv,
    /// l = floor(bitlen(q) / 2)
    Sm2,
}

impl AvfPolicy {
    pub fn truncation_bits(self, order: &BigUint) -> u64 {
        let bits = order.bits();
        match self {
            AvfPolicy::Mqv => bits.div_ceil(2),
            AvfPolicy::Sm2 => bits / 2,
        }
    }
}

/// A subgroup element in affine form. Plain data; all arithmetic lives on
/// [`Group`]. The curve tag prevents cross-backend mixups.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    curve: String,
    repr: PointRepr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PointRepr {
    Identity,
    Affine { x: BigUint, y: BigUint },
}

impl GroupElement {
    pub fn is_identity(&self) -> bool {
        matches!(self.repr, PointRepr::Identity)
    }

    pub fn curve(&self) -> &str {
        &self.curve
    }

    /// Unvalidated constructor for negative tests that need a point the
    /// public API refuses to build.
    #[cfg(test)]
    pub(crate) fn forge_affine(curve: &str, x: u64, y: u64) -> GroupElement {
        GroupElement {
            curve: curve.to_string(),
            repr: PointRepr::Affine { x: BigUint::from(x), y: BigUint::from(y) },
        }
    }
}

/// A scalar already reduced modulo the group order it was built against.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Big-endian, zero-padded to `width` bytes.
    pub fn to_bytes(&self, width: usize) -> Vec<u8> {
        let raw = self.0.to_bytes_be();
        let mut out = vec![0u8; width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }
}

/// Group parameters plus the arithmetic over them.
#[derive(Debug, Clone)]
pub struct Group {
    name: String,
    backend: Backend,
    p: BigUint,
    a: BigUint,
    b: BigUint,
    gx: BigUint,
    gy: BigUint,
    /// Prime order of the subgroup generated by g.
    q: BigUint,
    /// Cofactor h = N / q of the full curve group.
    cofactor: u64,
    field_bytes: usize,
    /// Only used by the fixed-LSB mock: (pinned bit count, pinned value).
    pin: Option<(u64, u64)>,
}

fn hexnum(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("valid hex literal")
}

impl Group {
    /// NIST P-256 (FIPS 186-4).
    pub fn p256() -> Group {
        let p = hexnum("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
        let a = &p - 3u32;
        Group {
            name: "p256".into(),
            backend: Backend::Real,
            a,
            b: hexnum("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
            gx: hexnum("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
            gy: hexnum("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
            q: hexnum("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"),
            cofactor: 1,
            field_bytes: 32,
            pin: None,
            p,
        }
    }

    /// The SM2 recommended curve (GB/T 32918.5).
    pub fn sm2p256() -> Group {
        Group {
            name: "sm2p256".into(),
            backend: Backend::Real,
            p: hexnum("fffffffeffffffffffffffffffffffffffffffff00000000ffffffffffffffff"),
            a: hexnum("fffffffeffffffffffffffffffffffffffffffff00000000fffffffffffffffc"),
            b: hexnum("28e9fa9e9d9f5e344d5a9e4bcf6509a7f39789f515ab8f92ddbcbd414d940e93"),
            gx: hexnum("32c4ae2c1f1981195f9904466a39c9948fe30bbff2660be1715a4589334c74c7"),
            gy: hexnum("bc3736a2f4f6779c59bdcee36b692153d0a9877cc62a474002df32e52139f0a0"),
            q: hexnum("fffffffeffffffffffffffffffffffff7203df6b21c6052b53bbf40939d54123"),
            cofactor: 1,
            field_bytes: 32,
            pin: None,
        }
    }

    /// Brute-forceable curve: y^2 = x^3 + x + 27 over F_63949.
    /// Full group order 63926 = 2 * 31963; the generator spans the prime
    /// subgroup. Order obtained by exhaustive point enumeration.
    pub fn toy() -> Group {
        Group {
            name: "toy".into(),
            backend: Backend::Toy,
            p: BigUint::from(63949u32),
            a: BigUint::from(1u32),
            b: BigUint::from(27u32),
            gx: BigUint::from(49146u32),
            gy: BigUint::from(26716u32),
            q: BigUint::from(31963u32),
            cofactor: 2,
            field_bytes: 2,
            pin: None,
        }
    }

    /// The toy group with the x-coordinate accessor doctored so that its low
    /// `l` bits always read as `c`. Group law and encodings are untouched;
    /// only `x_coordinate` (and therefore `avf`) sees the pinned value, which
    /// makes `avf` the constant 2^l + c for the matching policy.
    pub fn fixed_lsb_mock(l: u64, c: u64) -> Group {
        assert!(l < 16 && c < (1 << l), "pin must fit under the toy field width");
        let toy = Group::toy();
        Group {
            name: format!("mock-l{l}-c{c}"),
            backend: Backend::FixedLsbMock,
            pin: Some((l, c)),
            ..toy
        }
    }

    /// Registry lookup used by the CLI and scenario files. `mock` resolves to
    /// the fixed-LSB group pinned for the toy MQV truncation width (l = 8).
    pub fn by_name(name: &str) -> Result<Group, GroupError> {
        match name {
            "p256" => Ok(Group::p256()),
            "sm2p256" => Ok(Group::sm2p256()),
            "toy" => Ok(Group::toy()),
            "mock" => Ok(Group::fixed_lsb_mock(8, 5)),
            other => Err(GroupError::UnknownCurve(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn cofactor(&self) -> u64 {
        self.cofactor
    }

    pub fn field_bytes(&self) -> usize {
        self.field_bytes
    }

    /// Width in bytes of a canonically encoded scalar.
    pub fn scalar_bytes(&self) -> usize {
        (usize::try_from(self.q.bits()).expect("order width") + 7) / 8
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement {
            curve: self.name.clone(),
            repr: PointRepr::Affine { x: self.gx.clone(), y: self.gy.clone() },
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { curve: self.name.clone(), repr: PointRepr::Identity }
    }

    /// Builds an element from affine coordinates, rejecting off-curve input.
    pub fn element_from_affine(&self, x: BigUint, y: BigUint) -> Result<GroupElement, GroupError> {
        let el = GroupElement { curve: self.name.clone(), repr: PointRepr::Affine { x, y } };
        if self.satisfies_equation(&el) {
            Ok(el)
        } else {
            match el.repr {
                PointRepr::Affine { x, y } => Err(GroupError::OffCurve {
                    curve: self.name.clone(),
                    x: x.to_string(),
                    y: y.to_string(),
                }),
                PointRepr::Identity => unreachable!(),
            }
        }
    }

    fn check_curve_tag(&self, el: &GroupElement) -> Result<(), GroupError> {
        if el.curve == self.name {
            Ok(())
        } else {
            Err(GroupError::MixedCurve { expected: self.name.clone(), found: el.curve.clone() })
        }
    }

    fn satisfies_equation(&self, el: &GroupElement) -> bool {
        match &el.repr {
            PointRepr::Identity => true,
            PointRepr::Affine { x, y } => {
                if x >= &self.p || y >= &self.p {
                    return false;
                }
                let lhs = (y * y) % &self.p;
                let rhs = (x * x * x + &self.a * x + &self.b) % &self.p;
                lhs == rhs
            }
        }
    }

    /// Curve membership. The identity counts as a member; no subgroup check
    /// is performed beyond the curve equation (deliberately: the cofactor
    /// exponentiations in the two-phase schemes are what neutralize small
    /// subgroup components).
    pub fn is_on_curve(&self, el: &GroupElement) -> bool {
        el.curve == self.name && self.satisfies_equation(el)
    }

    /// Membership in the prime-order subgroup: q * P = identity. Test aid.
    pub fn in_prime_subgroup(&self, el: &GroupElement) -> Result<bool, GroupError> {
        Ok(self.exp(el, &Scalar(self.q.clone()))?.is_identity())
    }

    /// The x-coordinate as an integer. Errors on the identity. On the
    /// fixed-LSB mock the low bits read back pinned.
    pub fn x_coordinate(&self, el: &GroupElement) -> Result<BigUint, GroupError> {
        self.check_curve_tag(el)?;
        match &el.repr {
            PointRepr::Identity => Err(GroupError::IdentityXCoordinate),
            PointRepr::Affine { x, .. } => match self.pin {
                None => Ok(x.clone()),
                Some((l, c)) => Ok(((x >> l) << l) + BigUint::from(c)),
            },
        }
    }

    /// Associated value function: 2^l + (P.x mod 2^l) with the policy's
    /// truncation width. The identity is rejected, so the output is always
    /// in [2^l, 2^(l+1) - 1] and nonzero mod q on every supported group.
    pub fn avf(&self, el: &GroupElement, policy: AvfPolicy) -> Result<Scalar, GroupError> {
        let x = self.x_coordinate(el)?;
        let l = policy.truncation_bits(&self.q);
        let mask = (BigUint::one() << l) - BigUint::one();
        let v = (BigUint::one() << l) + (x & mask);
        Ok(Scalar(v % &self.q))
    }

    /// Group law on two elements.
    pub fn mul(&self, lhs: &GroupElement, rhs: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_curve_tag(lhs)?;
        self.check_curve_tag(rhs)?;
        if !self.satisfies_equation(lhs) {
            return self.off_curve_err(lhs);
        }
        if !self.satisfies_equation(rhs) {
            return self.off_curve_err(rhs);
        }
        Ok(self.add_affine(lhs, rhs))
    }

    fn off_curve_err(&self, el: &GroupElement) -> Result<GroupElement, GroupError> {
        match &el.repr {
            PointRepr::Affine { x, y } => Err(GroupError::OffCurve {
                curve: self.name.clone(),
                x: x.to_string(),
                y: y.to_string(),
            }),
            PointRepr::Identity => unreachable!("identity always satisfies the equation"),
        }
    }

    fn field_add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.p { s - &self.p } else { s }
    }

    fn field_sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b { a - b } else { &self.p - b + a }
    }

    fn field_mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    fn field_inv(&self, a: &BigUint) -> BigUint {
        // p is prime on every backend, so Fermat works and sidesteps
        // sign-juggling in the extended Euclid.
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    fn add_affine(&self, lhs: &GroupElement, rhs: &GroupElement) -> GroupElement {
        let (x1, y1) = match &lhs.repr {
            PointRepr::Identity => return rhs.clone(),
            PointRepr::Affine { x, y } => (x, y),
        };
        let (x2, y2) = match &rhs.repr {
            PointRepr::Identity => return lhs.clone(),
            PointRepr::Affine { x, y } => (x, y),
        };
        if x1 == x2 && self.field_add(y1, y2).is_zero() {
            return self.identity();
        }
        let lambda = if x1 == x2 {
            let num = self.field_add(&self.field_mul(&BigUint::from(3u32), &self.field_mul(x1, x1)), &self.a);
            let den = self.field_inv(&self.field_add(y1, y1));
            self.field_mul(&num, &den)
        } else {
            let num = self.field_sub(y2, y1);
            let den = self.field_inv(&self.field_sub(x2, x1));
            self.field_mul(&num, &den)
        };
        let x3 = self.field_sub(&self.field_sub(&self.field_mul(&lambda, &lambda), x1), x2);
        let y3 = self.field_sub(&self.field_mul(&lambda, &self.field_sub(x1, &x3)), y1);
        GroupElement { curve: self.name.clone(), repr: PointRepr::Affine { x: x3, y: y3 } }
    }

    /// Scalar exponentiation (double-and-add over Jacobian coordinates).
    /// `exp(P, 0)` is the identity; `exp(g, q)` is the identity.
    pub fn exp(&self, base: &GroupElement, k: &Scalar) -> Result<GroupElement, GroupError> {
        self.check_curve_tag(base)?;
        if !self.satisfies_equation(base) {
            return self.off_curve_err(base);
        }
        let (bx, by) = match &base.repr {
            PointRepr::Identity => return Ok(self.identity()),
            PointRepr::Affine { x, y } => (x.clone(), y.clone()),
        };
        if k.0.is_zero() {
            return Ok(self.identity());
        }
        let mut acc: Option<Jacobian> = None;
        for i in (0..k.0.bits()).rev() {
            if let Some(a) = acc.as_mut() {
                *a = self.jacobian_double(a);
            }
            if k.0.bit(i) {
                acc = Some(match acc {
                    None => Jacobian { x: bx.clone(), y: by.clone(), z: BigUint::one() },
                    Some(a) => self.jacobian_add_affine(&a, &bx, &by),
                });
            }
        }
        Ok(match acc {
            None => self.identity(),
            Some(j) => self.jacobian_to_affine(&j),
        })
    }

    fn jacobian_double(&self, p: &Jacobian) -> Jacobian {
        if p.y.is_zero() || p.z.is_zero() {
            return Jacobian::infinity();
        }
        let y2 = self.field_mul(&p.y, &p.y);
        let s = self.field_mul(&BigUint::from(4u32), &self.field_mul(&p.x, &y2));
        let z2 = self.field_mul(&p.z, &p.z);
        let z4 = self.field_mul(&z2, &z2);
        let m = self.field_add(
            &self.field_mul(&BigUint::from(3u32), &self.field_mul(&p.x, &p.x)),
            &self.field_mul(&self.a, &z4),
        );
        let x3 = self.field_sub(&self.field_mul(&m, &m), &self.field_add(&s, &s));
        let y4 = self.field_mul(&y2, &y2);
        let y3 = self.field_sub(
            &self.field_mul(&m, &self.field_sub(&s, &x3)),
            &self.field_mul(&BigUint::from(8u32), &y4),
        );
        let z3 = self.field_mul(&self.field_add(&p.y, &p.y), &p.z);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jacobian_add_affine(&self, p: &Jacobian, qx: &BigUint, qy: &BigUint) -> Jacobian {
        if p.z.is_zero() {
            return Jacobian { x: qx.clone(), y: qy.clone(), z: BigUint::one() };
        }
        let z2 = self.field_mul(&p.z, &p.z);
        let u2 = self.field_mul(qx, &z2);
        let s2 = self.field_mul(qy, &self.field_mul(&z2, &p.z));
        if p.x == u2 {
            if p.y == s2 {
                return self.jacobian_double(p);
            }
            return Jacobian::infinity();
        }
        let h = self.field_sub(&u2, &p.x);
        let r = self.field_sub(&s2, &p.y);
        let h2 = self.field_mul(&h, &h);
        let h3 = self.field_mul(&h2, &h);
        let uh2 = self.field_mul(&p.x, &h2);
        let x3 = self.field_sub(
            &self.field_sub(&self.field_mul(&r, &r), &h3),
            &self.field_add(&uh2, &uh2),
        );
        let y3 = self.field_sub(
            &self.field_mul(&r, &self.field_sub(&uh2, &x3)),
            &self.field_mul(&p.y, &h3),
        );
        let z3 = self.field_mul(&p.z, &h);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn jacobian_to_affine(&self, p: &Jacobian) -> GroupElement {
        if p.z.is_zero() {
            return self.identity();
        }
        let zinv = self.field_inv(&p.z);
        let zinv2 = self.field_mul(&zinv, &zinv);
        let x = self.field_mul(&p.x, &zinv2);
        let y = self.field_mul(&p.y, &self.field_mul(&zinv2, &zinv));
        GroupElement { curve: self.name.clone(), repr: PointRepr::Affine { x, y } }
    }

    /// g^k for a scalar k.
    pub fn exp_generator(&self, k: &Scalar) -> Result<GroupElement, GroupError> {
        self.exp(&self.generator(), k)
    }

    /// Inverse element.
    pub fn invert(&self, el: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_curve_tag(el)?;
        Ok(match &el.repr {
            PointRepr::Identity => self.identity(),
            PointRepr::Affine { x, y } => GroupElement {
                curve: self.name.clone(),
                repr: PointRepr::Affine { x: x.clone(), y: self.field_sub(&BigUint::zero(), y) },
            },
        })
    }

    // ---- scalar arithmetic mod q ----

    pub fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar(BigUint::from(v) % &self.q)
    }

    pub fn scalar_from_biguint(&self, v: BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn scalar_from_bytes_be(&self, bytes: &[u8]) -> Scalar {
        Scalar(BigUint::from_bytes_be(bytes) % &self.q)
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(((&a.0 + &self.q) - &b.0) % &self.q)
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        if a.0.is_zero() { Scalar(BigUint::zero()) } else { Scalar(&self.q - &a.0) }
    }

    pub fn scalar_inv(&self, a: &Scalar) -> Result<Scalar, GroupError> {
        if a.0.is_zero() || a.0.gcd(&self.q) != BigUint::one() {
            return Err(GroupError::NonInvertibleScalar(a.0.to_string()));
        }
        Ok(Scalar(a.0.modpow(&(&self.q - 2u32), &self.q)))
    }

    /// Uniform scalar in [1, q-1] by rejection sampling.
    pub fn sample_scalar(&self, rng: &mut ChaCha20Rng) -> Scalar {
        let bits = self.q.bits();
        let bytes = usize::try_from((bits + 7) / 8).expect("order width");
        let excess = (bytes as u64) * 8 - bits;
        loop {
            let mut buf = vec![0u8; bytes];
            rng.fill_bytes(&mut buf);
            buf[0] &= 0xffu8 >> excess;
            let v = BigUint::from_bytes_be(&buf);
            if !v.is_zero() && v < self.q {
                return Scalar(v);
            }
        }
    }

    /// Uniform non-identity subgroup point.
    pub fn sample_point(&self, rng: &mut ChaCha20Rng) -> GroupElement {
        let k = self.sample_scalar(rng);
        self.exp_generator(&k).expect("generator is on curve")
    }

    /// `n` deterministic subgroup points for a seed. Never yields the
    /// identity (exponents are drawn from [1, q-1]).
    pub fn sample_points(&self, seed: u64, n: usize) -> Vec<GroupElement> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_point(&mut rng)).collect()
    }

    // ---- encoding ----

    /// Uncompressed affine encoding: x || y, each big-endian and zero-padded
    /// to the field width. The identity encodes as all zeroes (no affine
    /// point on any supported curve has x = y = 0 since b != 0).
    pub fn encode(&self, el: &GroupElement) -> Result<Vec<u8>, GroupError> {
        self.check_curve_tag(el)?;
        let w = self.field_bytes;
        Ok(match &el.repr {
            PointRepr::Identity => vec![0u8; 2 * w],
            PointRepr::Affine { x, y } => {
                let mut out = pad_be(x, w);
                out.extend_from_slice(&pad_be(y, w));
                out
            }
        })
    }

    pub fn encode_hex(&self, el: &GroupElement) -> Result<String, GroupError> {
        Ok(hex::encode(self.encode(el)?))
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<GroupElement, GroupError> {
        let w = self.field_bytes;
        if bytes.len() != 2 * w {
            return Err(GroupError::InvalidEncoding(format!(
                "expected {} bytes, got {}",
                2 * w,
                bytes.len()
            )));
        }
        if bytes.iter().all(|&b| b == 0) {
            return Ok(self.identity());
        }
        let x = BigUint::from_bytes_be(&bytes[..w]);
        let y = BigUint::from_bytes_be(&bytes[w..]);
        self.element_from_affine(x, y)
    }

    pub fn decode_hex(&self, s: &str) -> Result<GroupElement, GroupError> {
        let bytes = hex::decode(s).map_err(|e| GroupError::InvalidEncoding(e.to_string()))?;
        self.decode(&bytes)
    }
}

fn pad_be(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let mut out = vec![0u8; width.saturating_sub(raw.len())];
    out.extend_from_slice(&raw);
    out
}

struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl Jacobian {
    fn infinity() -> Jacobian {
        Jacobian { x: BigUint::one(), y: BigUint::one(), z: BigUint::zero() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_point(group: &Group, x: u32, y: u32) -> GroupElement {
        group
            .element_from_affine(BigUint::from(x), BigUint::from(y))
            .expect("frozen coordinates are on the toy curve")
    }

    fn toy_exp(group: &Group, k: u64) -> GroupElement {
        group.exp_generator(&group.scalar_from_u64(k)).unwrap()
    }

    #[test]
    fn toy_generator_matches_frozen_value() {
        let g = Group::toy();
        assert_eq!(g.generator(), toy_point(&g, 49146, 26716));
        assert_eq!(g.order(), &BigUint::from(31963u32));
        assert_eq!(g.cofactor(), 2);
    }

    #[test]
    fn toy_scalar_multiples_match_frozen_values() {
        let g = Group::toy();
        let expect = [
            (1u64, 49146u32, 26716u32),
            (2, 41781, 24477),
            (3, 26386, 27047),
            (5, 41141, 47756),
            (7, 35322, 45244),
            (1234, 60796, 32846),
            (12345, 7196, 60049),
            (31962, 49146, 37233),
        ];
        for (k, x, y) in expect {
            assert_eq!(toy_exp(&g, k), toy_point(&g, x, y), "k = {k}");
        }
    }

    #[test]
    fn toy_order_annihilates_generator() {
        let g = Group::toy();
        assert!(g.exp_generator(&Scalar(g.order().clone())).unwrap().is_identity());
        assert_eq!(toy_exp(&g, 31964), g.generator());
    }

    #[test]
    fn exp_by_zero_is_identity() {
        let g = Group::toy();
        let p = toy_exp(&g, 17);
        assert!(g.exp(&p, &g.scalar_from_u64(0)).unwrap().is_identity());
    }

    #[test]
    fn addition_matches_frozen_sum() {
        let g = Group::toy();
        let p17 = toy_exp(&g, 17);
        let p40 = toy_exp(&g, 40);
        assert_eq!(p17, toy_point(&g, 17162, 54572));
        assert_eq!(p40, toy_point(&g, 38815, 44783));
        let sum = g.mul(&p17, &p40).unwrap();
        assert_eq!(sum, toy_point(&g, 25119, 59590));
        assert_eq!(sum, toy_exp(&g, 57));
    }

    #[test]
    fn inverse_pairs_cancel() {
        let g = Group::toy();
        let p = toy_exp(&g, 123);
        let inv = g.invert(&p).unwrap();
        assert!(g.mul(&p, &inv).unwrap().is_identity());
        assert_eq!(inv, toy_exp(&g, 31963 - 123));
    }

    #[test]
    fn off_curve_points_are_rejected() {
        let g = Group::toy();
        assert!(matches!(
            g.element_from_affine(BigUint::from(1u32), BigUint::from(1u32)),
            Err(GroupError::OffCurve { .. })
        ));
    }

    #[test]
    fn mixed_curve_operations_are_rejected() {
        let toy = Group::toy();
        let p256 = Group::p256();
        let err = toy.mul(&toy.generator(), &p256.generator()).unwrap_err();
        assert!(matches!(err, GroupError::MixedCurve { .. }));
        // The mock shares coordinates with the toy curve but is still a
        // distinct group as far as tagging is concerned.
        let mock = Group::fixed_lsb_mock(8, 5);
        assert!(matches!(
            toy.mul(&toy.generator(), &mock.generator()),
            Err(GroupError::MixedCurve { .. })
        ));
    }

    #[test]
    fn curve_membership_does_not_imply_subgroup_membership() {
        let g = Group::toy();
        // (0, 2747) is on the curve but outside the prime-order subgroup,
        // and (55434, 0) is the order-2 point.
        let outside = toy_point(&g, 0, 2747);
        assert!(g.is_on_curve(&outside));
        assert!(!g.in_prime_subgroup(&outside).unwrap());
        let two_torsion = toy_point(&g, 55434, 0);
        assert!(g.is_on_curve(&two_torsion));
        assert!(g.mul(&two_torsion, &two_torsion).unwrap().is_identity());
        assert!(g.is_on_curve(&g.identity()));
        assert!(g.in_prime_subgroup(&g.generator()).unwrap());
    }

    #[test]
    fn avf_truncation_widths() {
        let toy = Group::toy();
        assert_eq!(AvfPolicy::Mqv.truncation_bits(toy.order()), 8);
        assert_eq!(AvfPolicy::Sm2.truncation_bits(toy.order()), 7);
        let p256 = Group::p256();
        assert_eq!(AvfPolicy::Mqv.truncation_bits(p256.order()), 128);
        assert_eq!(AvfPolicy::Sm2.truncation_bits(p256.order()), 128);
    }

    #[test]
    fn avf_matches_frozen_values() {
        let g = Group::toy();
        let cases = [(1u64, 506u64, 250u64), (2, 309, 181), (12345, 284, 156)];
        for (k, mqv, sm2) in cases {
            let p = toy_exp(&g, k);
            assert_eq!(g.avf(&p, AvfPolicy::Mqv).unwrap(), g.scalar_from_u64(mqv));
            assert_eq!(g.avf(&p, AvfPolicy::Sm2).unwrap(), g.scalar_from_u64(sm2));
        }
    }

    #[test]
    fn avf_rejects_identity() {
        let g = Group::toy();
        assert_eq!(g.avf(&g.identity(), AvfPolicy::Mqv), Err(GroupError::IdentityXCoordinate));
    }

    #[test]
    fn avf_range_is_always_one_bit_above_truncation() {
        let g = Group::toy();
        for p in g.sample_points(7, 64) {
            for (policy, l) in [(AvfPolicy::Mqv, 8u32), (AvfPolicy::Sm2, 7u32)] {
                let v: u64 = g.avf(&p, policy).unwrap().value().try_into().unwrap();
                assert!((1u64 << l) <= v && v < (1u64 << (l + 1)), "avf out of range: {v}");
            }
        }
    }

    #[test]
    fn p256_multiples_match_frozen_values() {
        let g = Group::p256();
        let cases = [
            (
                BigUint::from(2u32),
                "7cf27b188d034f7e8a52380304b51ac3c08969e277f21b35a60b48fc47669978",
                "07775510db8ed040293d9ac69f7430dbba7dade63ce982299e04b79d227873d1",
            ),
            (
                BigUint::from(3u32),
                "5ecbe4d1a6330a44c8f7ef951d4bf165e6c6b721efada985fb41661bc6e7fd6c",
                "8734640c4998ff7e374b06ce1a64a2ecd82ab036384fb83d9a79b127a27d5032",
            ),
            (
                BigUint::from(0xdeadbeefu64),
                "b487d183dc4806058eb31a29bedefd7bcca987b77a381a3684871d8449c18394",
                "2a122cc711a80453678c3032de4b6fff2c86342e82d1e7adb617c4165c43ce5e",
            ),
            (
                (BigUint::one() << 200) + BigUint::from(12345u32),
                "f805cb24c0992b29345b4ebe2f6307f711600806aa5f8f85c20a20c093b674de",
                "c062ca996c912ee34533be667a50242469762c015b072e8b0b60f14db7e215ed",
            ),
        ];
        for (k, x, y) in cases {
            let got = g.exp_generator(&g.scalar_from_biguint(k)).unwrap();
            assert_eq!(got, g.element_from_affine(hexnum(x), hexnum(y)).unwrap());
        }
        assert!(g.exp_generator(&Scalar(g.order().clone())).unwrap().is_identity());
    }

    #[test]
    fn sm2_curve_multiples_match_frozen_values() {
        let g = Group::sm2p256();
        let cases = [
            (
                BigUint::from(2u32),
                "56cefd60d7c87c000d58ef57fa73ba4d9c0dfa08c08a7331495c2e1da3f2bd52",
                "31b7e7e6cc8189f668535ce0f8eaf1bd6de84c182f6c8e716f780d3a970a23c3",
            ),
            (
                BigUint::from(0xdeadbeefu64),
                "02e6901e876688f437f1aa5fb540711ba1273d102d30e67001dff76652241c40",
                "997e8bd49204d1018e7e2df69c9ffb14a7d44190cc0eb7731bf6f178b3294645",
            ),
            (
                (BigUint::one() << 200) + BigUint::from(12345u32),
                "af97681daefe26f1d331db7cc5d03ab287833be4f36817e8bc859f345c374909",
                "af0433210dd20ab5a0050d459636f0ef64d3182c64469479d6510f531c5ec49e",
            ),
        ];
        for (k, x, y) in cases {
            let got = g.exp_generator(&g.scalar_from_biguint(k)).unwrap();
            assert_eq!(got, g.element_from_affine(hexnum(x), hexnum(y)).unwrap());
        }
        assert!(g.exp_generator(&Scalar(g.order().clone())).unwrap().is_identity());
    }

    #[test]
    fn mock_pins_x_coordinate_bits_and_avf() {
        let toy = Group::toy();
        let mock = Group::fixed_lsb_mock(8, 5);
        let expected = mock.scalar_from_u64((1 << 8) + 5);
        for p in mock.sample_points(99, 32) {
            let x = mock.x_coordinate(&p).unwrap();
            assert_eq!(x.clone() & BigUint::from(0xffu32), BigUint::from(5u32));
            assert_eq!(mock.avf(&p, AvfPolicy::Mqv).unwrap(), expected);
        }
        // The wrapped law agrees with the plain toy law coordinate-wise.
        let a = mock.sample_points(1, 1).pop().unwrap();
        let b = mock.sample_points(2, 1).pop().unwrap();
        let mock_sum = mock.mul(&a, &b).unwrap();
        let as_toy = |e: &GroupElement| toy.decode(&mock.encode(e).unwrap()).unwrap();
        let toy_sum = toy.mul(&as_toy(&a), &as_toy(&b)).unwrap();
        assert_eq!(as_toy(&mock_sum), toy_sum);
    }

    #[test]
    fn encoding_round_trips_and_matches_frozen_hex() {
        let g = Group::toy();
        assert_eq!(g.encode_hex(&g.generator()).unwrap(), "bffa685c");
        assert_eq!(g.encode_hex(&toy_exp(&g, 12345)).unwrap(), "1c1cea91");
        assert_eq!(g.decode_hex("bffa685c").unwrap(), g.generator());
        assert_eq!(g.decode(&g.encode(&g.identity()).unwrap()).unwrap(), g.identity());
        assert!(matches!(g.decode(&[0u8; 3]), Err(GroupError::InvalidEncoding(_))));
        // Decoding validates the curve equation.
        assert!(matches!(g.decode_hex("00010001"), Err(GroupError::OffCurve { .. })));
        let p256 = Group::p256();
        let enc = p256.encode(&p256.generator()).unwrap();
        assert_eq!(enc.len(), 64);
        assert_eq!(p256.decode(&enc).unwrap(), p256.generator());
    }

    #[test]
    fn sampling_is_seed_deterministic_and_avoids_identity() {
        let g = Group::toy();
        let a = g.sample_points(42, 40);
        let b = g.sample_points(42, 40);
        let c = g.sample_points(43, 40);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in &a {
            assert!(!p.is_identity());
            assert!(g.is_on_curve(p));
            assert!(g.in_prime_subgroup(p).unwrap());
        }
    }

    #[test]
    fn scalar_arithmetic_round_trips() {
        let g = Group::toy();
        let a = g.scalar_from_u64(12000);
        let b = g.scalar_from_u64(25000);
        assert_eq!(g.scalar_add(&a, &b), g.scalar_from_u64((12000 + 25000) % 31963));
        assert_eq!(g.scalar_mul(&a, &b), g.scalar_from_u64(12000 * 25000 % 31963));
        assert_eq!(g.scalar_add(&a, &g.scalar_neg(&a)), g.scalar_from_u64(0));
        let inv = g.scalar_inv(&b).unwrap();
        assert_eq!(g.scalar_mul(&b, &inv), g.scalar_from_u64(1));
        assert!(matches!(
            g.scalar_inv(&g.scalar_from_u64(0)),
            Err(GroupError::NonInvertibleScalar(_))
        ));
    }

    #[test]
    fn registry_resolves_known_names_only() {
        for name in ["p256", "sm2p256", "toy", "mock"] {
            assert_eq!(Group::by_name(name).unwrap().name().is_empty(), false);
        }
        assert!(matches!(Group::by_name("p384"), Err(GroupError::UnknownCurve(_))));
    }

    proptest! {
        #[test]
        fn exponent_addition_matches_group_law(a in 0u64..31963, b in 0u64..31963) {
            let g = Group::toy();
            let lhs = toy_exp(&g, (a + b) % 31963);
            let rhs = g.mul(&toy_exp(&g, a), &toy_exp(&g, b)).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn repeated_exponentiation_multiplies_exponents(a in 1u64..31963, b in 1u64..31963) {
            let g = Group::toy();
            let lhs = g.exp(&toy_exp(&g, a), &g.scalar_from_u64(b)).unwrap();
            let rhs = toy_exp(&g, a * b % 31963);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn sampled_scalars_stay_in_range(seed in 0u64..5000) {
            let g = Group::toy();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let s = g.sample_scalar(&mut rng);
            prop_assert!(!s.is_zero());
            prop_assert!(s.value() < g.order());
        }
    }
}
