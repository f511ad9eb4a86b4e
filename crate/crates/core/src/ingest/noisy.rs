use crate::dataset::Dataset;
use crate::error::{BifError, Result};
use crate::nn::{fit_network, Architecture, FrozenModel, GradientNoise, TrainConfig};

/// Trains with per-example gradients clipped to `clip_norm` and Gaussian noise
/// of standard deviation `sigma * clip_norm` added to each coordinate of the
/// summed batch gradient before averaging. No privacy accounting is done.
pub fn noisy_train(
    ds: &Dataset,
    arch: &Architecture,
    cfg: &TrainConfig,
    clip_norm: f64,
    sigma: f64,
) -> Result<FrozenModel> {
    if !(clip_norm > 0.0 && clip_norm.is_finite()) {
        return Err(BifError::Config(format!(
            "clip_norm must be positive and finite, got {clip_norm}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(BifError::Config(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    cfg.validate()
        .map_err(|e| BifError::Config(e.to_string()))?;
    fit_network(ds, arch, cfg, Some(&GradientNoise { clip_norm, sigma }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{train_classifier, Activation};
    use crate::synth::{generate, SynId, SynSpec};

    fn small() -> (Dataset, Architecture, TrainConfig) {
        let ds = generate(&SynSpec::new(SynId::Syn1, 200, 4)).unwrap();
        let arch = Architecture {
            hidden: vec![8],
            activation: Activation::Relu,
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 32,
            seed: 11,
            ..TrainConfig::default()
        };
        (ds, arch, cfg)
    }

    #[test]
    fn no_noise_and_huge_clip_is_plain_training() {
        let (ds, arch, cfg) = small();
        let plain = train_classifier(&ds, &arch, &cfg).unwrap();
        let noisy = noisy_train(&ds, &arch, &cfg, 1e9, 0.0).unwrap();
        assert_eq!(plain, noisy);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let (ds, arch, cfg) = small();
        let a = noisy_train(&ds, &arch, &cfg, 1.0, 2.0).unwrap();
        let b = noisy_train(&ds, &arch, &cfg, 1.0, 2.0).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = noisy_train(&ds, &arch, &cfg, 1.0, 0.0).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        let (ds, arch, cfg) = small();
        assert!(matches!(
            noisy_train(&ds, &arch, &cfg, 0.0, 1.0),
            Err(BifError::Config(_))
        ));
        assert!(matches!(
            noisy_train(&ds, &arch, &cfg, 1.0, -0.5),
            Err(BifError::Config(_))
        ));
        let bad = TrainConfig { epochs: 0, ..cfg };
        assert!(matches!(
            noisy_train(&ds, &arch, &bad, 1.0, 1.0),
            Err(BifError::Config(_))
        ));
    }
}
