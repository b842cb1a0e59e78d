pub mod tdma_grid;
