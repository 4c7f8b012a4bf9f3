use rwl_core::dyadic::Direction;
use rwl_core::estimates::{op_norm, t_ell_operator, Budget};
use rwl_core::grid::make_grid;
use rwl_core::multipliers::build_calderon_pair;
use rwl_core::wavelet::build_wavelet_system;

fn main() -> rwl_core::Result<()> {
    let grid = make_grid(2, 7)?;
    let eps = Direction::new(&[1, 0])?;
    let sys = build_wavelet_system("db2", grid, &[eps.clone()])?;
    let pair = build_calderon_pair(grid)?;
    for ell in 0..4 {
        let t = t_ell_operator(&sys, &pair, ell, eps.clone(), None);
        let est = op_norm(&t, 2.0, &Budget::default())?;
        println!("l = {ell}: |T_l|_2 >= {:.4}", est.lower);
    }
    Ok(())
}
