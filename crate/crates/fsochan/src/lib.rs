pub mod pdt;
pub mod qkd;
pub mod qmc;
pub mod quad;
pub mod scenario;
pub mod special;
pub mod tracking;
pub mod turbulence;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/key-rates.md")]
    mod key_rates {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
