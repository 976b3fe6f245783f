use std::path::{Path, PathBuf};

use clap::Args;
use misinfo_core::{Result, RunConfig};

macro_rules! config_flags {
    ($($key:ident),* $(,)?) => {
        /// Experiment settings. Every flag overrides the same key from
        /// `--config`.
        #[derive(Debug, Default, Clone, Args)]
        pub struct ConfigFlags {
            /// File of `key = value` lines; `#` starts a comment.
            #[arg(long, global = true, value_name = "FILE")]
            pub config: Option<PathBuf>,
            $(
                #[arg(long, global = true, value_name = "VALUE", help_heading = "Settings",
                      help = concat!("Sets `", stringify!($key), "`"))]
                pub $key: Option<String>,
            )*
        }

        impl ConfigFlags {
            pub fn overrides(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$key {
                        out.push((stringify!($key), v.as_str()));
                    }
                )*
                out
            }

            #[cfg(test)]
            pub fn keys() -> &'static [&'static str] {
                &[$(stringify!($key)),*]
            }
        }
    };
}

config_flags!(
    aspects,
    external,
    rank_tta,
    rank_hta,
    rank_tags,
    rank_external,
    rank_order,
    window,
    min_count,
    hashtag_min_count,
    remove_stopwords,
    cp_max_sweeps,
    cp_tol,
    normalization,
    r_joint,
    r_individual,
    alpha,
    n_perm,
    jive_eps,
    jive_max_iter,
    k,
    edge_weight,
    homophily,
    fabp_max_iter,
    fabp_tol,
    fabp_guard,
    label_fraction,
    trials,
    balance,
    articles_per_domain,
    seed,
    positive_class,
    report,
    trials_csv,
    timings,
);

impl ConfigFlags {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_text(&read_text(path)?)?;
        }
        for (key, value) in self.overrides() {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}
