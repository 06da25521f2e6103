pub mod fd;
pub mod metrics_oracle;
