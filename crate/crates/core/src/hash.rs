//! Stable content hashing used for vertex ids and build metadata.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the parts, each terminated by a unit separator so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
pub(crate) fn fnv1a_parts<I, S>(parts: I) -> u64
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in part.as_ref() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        h ^= 0x1f;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
