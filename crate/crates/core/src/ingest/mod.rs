//! Loaders for tabular CSV files and MNIST IDX files, and noisy training.
//!
//! Tabular features are shifted to zero mean with train-split statistics;
//! there is no variance scaling. MNIST images are filtered to the requested
//! digits and exposed as 49 groups of 4×4 pixels through [`PatchView`].
//!
//! [`noisy_train`] is a gradient-perturbation knob (clipping plus Gaussian
//! noise) without privacy accounting. For reference, the usual noise levels
//! map to privacy budgets roughly as follows:
//!
//! | σ    | ε     |
//! |------|-------|
//! | 0    | ∞     |
//! | 1.35 | 8.07  |
//! | 2.3  | 4.01  |
//! | 4.4  | 1.94  |
//! | 8.4  | 0.984 |
//! | 17   | 0.48  |

mod mnist;
mod noisy;
mod tabular;

pub use mnist::{
    encode_idx_images, encode_idx_labels, load_mnist, mnist_dataset, parse_idx_images,
    parse_idx_labels, patch_expand, IdxImages, PatchView, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use noisy::noisy_train;
pub use tabular::{load_csv, ColumnKind, ColumnSpec, TabularData, TabularSchema};
