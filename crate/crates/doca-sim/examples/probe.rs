use doca_sim::model::{ScenarioConfig, SpeedModel};
use doca_sim::run_scenario;

fn main() {
    let seeds: Vec<u64> = (1..=10).collect();
    for pred in [5.0, 15.0, 30.0, 35.0, 45.0] {
        let config = ScenarioConfig {
            predicted_speed_model: SpeedModel::constant(pred),
            ..ScenarioConfig::default()
        };
        let mut str_sum = 0.0;
        let mut adm = 0.0;
        let mut delay = 0.0;
        let mut de = 0.0;
        let mut de_base = 0.0;
        let mut far = 0u64;
        let mut interf = 0u64;
        let start = std::time::Instant::now();
        for &s in &seeds {
            let out = run_scenario(&config, s).unwrap();
            str_sum += out.main.report.successful_transmission_rate;
            adm += out.main.report.admission_rate;
            delay += out.main.report.avg_schedule_delay_s;
            de += out.main.report.shares.dropd_else;
            de_base += out.baseline.report.shares.dropd_else;
            far += out.main.report.counts.schd_but_rx_is_far;
            interf += out.main.report.counts.schd_but_rx_rec_interf;
        }
        let n = seeds.len() as f64;
        println!(
            "pred {pred:>4}: STR {:.3} adm {:.3} delay {:.4} dropd_else {:.3} (base {:.3}) far {far} interf {interf}  [{:.1}s]",
            str_sum / n,
            adm / n,
            delay / n,
            de / n,
            de_base / n,
            start.elapsed().as_secs_f64()
        );
    }
}
