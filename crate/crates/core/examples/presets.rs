//! Gibbs points and MDP variances of the named models.
use conddev::presets::Preset;
use conddev::rates::{mdp_params, RateFunction};

fn main() -> conddev::Result<()> {
    for name in Preset::NAMES {
        let (law, spec) = Preset::by_name(name)?.expand(1, 1)?;
        let rf = RateFunction::new(&law, spec.ratio())?;
        let alpha2 = mdp_params(&law, spec.ratio()).map(|m| m.alpha2);
        println!("{name:16} tau {:+.6}  chi {:.8}  alpha^2 {:?}", rf.tau(), rf.gibbs_point()?, alpha2);
    }
    Ok(())
}
