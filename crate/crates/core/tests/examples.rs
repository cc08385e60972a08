macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(leapfrog_dynamics, "leapfrog_dynamics.rs");
example!(malt_trajectory, "malt_trajectory.rs");
example!(adaptive_sampling, "adaptive_sampling.rs");
example!(baselines, "baselines.rs");
example!(online_pca, "online_pca.rs");
example!(ess_diagnostics, "ess_diagnostics.rs");
example!(tau_gamma_sweep, "tau_gamma_sweep.rs");
example!(bench_battery, "bench_battery.rs");
example!(custom_target, "custom_target.rs");
example!(config_files, "config_files.rs");
