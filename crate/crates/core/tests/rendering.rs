mod common;

use hessot::oracles::{two_point_oracle, TwoPointCase};
use hessot::svg::{render_svg, SvgStyle, NEGATIVE, POSITIVE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn case_b_draws_two_arms_of_each_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let [x1, x2, y1, y2] = common::two_point_instance(&mut rng, TwoPointCase::B);
        let sol = two_point_oracle(&x1, &x2, &y1, &y2).unwrap();
        let svg = render_svg(&sol.sigma, &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<path").count(), 4);
        assert_eq!(svg.matches(POSITIVE).count(), 2);
        assert_eq!(svg.matches(NEGATIVE).count(), 2);
    }
}
