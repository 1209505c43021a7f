from .metrics import divergences, generate, js_divergence, kl_divergence, nll_real
from .models import (
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    OracleModel,
    sample_categorical,
)
from .training import (
    GanConfig,
    GanRun,
    adversarial_step,
    disc_loss_and_grad,
    fit_oracle,
    load_generator,
    mc_rollout_q,
    mle_loss_and_grad,
    pretrain_mle,
    rollout_rewards,
)

VARIANTS = {
    "vanilla": {"disc": "conv", "attention": False, "core": "lstm"},
    "gru_disc": {"disc": "gru", "attention": False, "core": "lstm"},
    "gru_disc_attention": {"disc": "gru", "attention": True, "core": "lstm"},
    "ga": {"disc": "gru", "attention": True, "core": "gru"},
}


def variant_configs(vocab, variant="ga", embed=32, hidden=64, **overrides):
    """Generator/discriminator configs for a named ablation variant or explicit flags."""
    flags = dict(VARIANTS[variant]) if isinstance(variant, str) else dict(variant)
    flags.update(overrides)
    g = GeneratorConfig(vocab=vocab, embed=embed, hidden=hidden, core=flags["core"],
                        attention=bool(flags["attention"]))
    d = DiscriminatorConfig(vocab=vocab, embed=embed, hidden=hidden, kind=flags["disc"])
    return g, d
