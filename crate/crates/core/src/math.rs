// Float functions that `core` does not provide. With the `std` feature the
// platform implementations are used, otherwise the `libm` ports.

#[cfg(feature = "std")]
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(feature = "std")]
#[inline]
pub(crate) fn trunc(x: f64) -> f64 {
    x.trunc()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn trunc(x: f64) -> f64 {
    libm::trunc(x)
}
