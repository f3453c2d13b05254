mod common;
use thinforms::Pmf;

// one-off printer used to freeze the regression constants
#[test]
#[ignore]
fn print_oracle_gaps() {
    let geo = Pmf::geometric(2.0, 40).unwrap();
    let poi = Pmf::poisson(1.0, 40).unwrap();
    let uni3 = Pmf::uniform(3);
    let uni2 = Pmf::uniform(2);
    let two = Pmf::from_probs(vec![0.3, 0.0, 0.7], "two-point").unwrap();

    for (name, law) in [
        ("T1 poisson(1) p=0.5", common::enum_joint_t1(poi.probs(), 0.5)),
        ("T1 uniform(3) p=0.5", common::enum_joint_t1(uni3.probs(), 0.5)),
        ("T1 uniform(2) p=0.5", common::enum_joint_t1(uni2.probs(), 0.5)),
        ("T1 twopoint p=0.5", common::enum_joint_t1(two.probs(), 0.5)),
        ("T2 geometric(2) (0.3,0.6)", common::enum_joint_t2(geo.probs(), 0.3, 0.6)),
        ("T2 uniform(3) (0.3,0.6)", common::enum_joint_t2(uni3.probs(), 0.3, 0.6)),
        ("T2 twopoint (0.3,0.6)", common::enum_joint_t2(two.probs(), 0.3, 0.6)),
    ] {
        println!("{name}: gap = {:.17e}", common::gap_from_law(&law));
    }
}
