use fenor::array::*;
use fenor::defaults::{self, StackScenario};

fn main() {
    let cfg_neg = defaults::planar_array_vt_neg();
    let sch_neg = defaults::read_scheme_vt_neg();
    let vinh = required_vinh(&cfg_neg, &sch_neg, cfg_neg.v_floor).unwrap();
    let r_neg = simulate_read(&cfg_neg, &sch_neg.with_v_inh(vinh), 0).unwrap();
    println!("vt=-0.4: vinh {vinh:+.3}  margin {:.3}  delay {:.2?} ns  energy {:.1} fJ/bit",
        r_neg.sensing_margin, r_neg.read_delay.map(|d| d * 1e9), r_neg.read_energy * 1e15);

    let cfg_pos = defaults::planar_array();
    let sch_pos = defaults::read_scheme();
    let vinh_pos = required_vinh(&cfg_pos, &sch_pos, cfg_pos.v_floor).unwrap();
    let r_pos = simulate_read(&cfg_pos, &sch_pos, 0).unwrap();
    println!("vt=+0.1: vinh {vinh_pos:+.3}  margin {:.3}  delay {:.2?} ns  energy {:.1} fJ/bit",
        r_pos.sensing_margin, r_pos.read_delay.map(|d| d * 1e9), r_pos.read_energy * 1e15);
    println!("ratio = {:.2}", r_neg.read_energy / r_pos.read_energy);

    let vch = ArrayConfig { vt_pgm: cfg_pos.vt_pgm, vt_ers: cfg_pos.vt_ers, ..defaults::vch_array() };
    let r_vch = simulate_read(&vch, &sch_pos, 0).unwrap();
    println!("vch: delay {:.2?} ns feasible {} (planar {:.2?})",
        r_vch.read_delay.map(|d| d * 1e9), r_vch.feasible, r_pos.read_delay.map(|d| d * 1e9));

    for sc in StackScenario::all() {
        let (cfg, scheme) = defaults::stack_setup(sc);
        let n = max_nstack(&cfg, &scheme, &defaults::stack_candidates()).unwrap();
        println!("{} -> {n}", sc.label());
    }
}
