//! Roundabout decision engine: geometry, kinematics, rewards, a factored
//! POMDP model, policy prediction, Monte-Carlo tree search and a small
//! kinematic microsimulator to evaluate it in.

pub mod driver;
pub mod dynamics;
pub mod geometry;
pub mod planner;
pub mod policy_prediction;
pub mod pomdp;
pub mod rewards;
pub mod scalar;
pub mod simulator;

pub use scalar::Real;

pub type Point2F64 = geometry::Point2<f64>;
pub type RoundaboutLayoutF64 = geometry::RoundaboutLayout<f64>;
pub type PathSpecF64 = geometry::PathSpec<f64>;
pub type EgoStateF64 = dynamics::EgoState<f64>;
pub type OtherVehicleStateF64 = dynamics::OtherVehicleState<f64>;
pub type DrivingPolicyF64 = dynamics::DrivingPolicy<f64>;
pub type RewardConfigF64 = rewards::RewardConfig<f64>;
pub type JointStateF64 = pomdp::JointState<f64>;
pub type FactoredBeliefF64 = pomdp::FactoredBelief<f64>;

pub type Point2F32 = geometry::Point2<f32>;
pub type RoundaboutLayoutF32 = geometry::RoundaboutLayout<f32>;
pub type PathSpecF32 = geometry::PathSpec<f32>;
pub type EgoStateF32 = dynamics::EgoState<f32>;
pub type OtherVehicleStateF32 = dynamics::OtherVehicleState<f32>;
pub type DrivingPolicyF32 = dynamics::DrivingPolicy<f32>;
pub type RewardConfigF32 = rewards::RewardConfig<f32>;
pub type JointStateF32 = pomdp::JointState<f32>;
pub type FactoredBeliefF32 = pomdp::FactoredBelief<f32>;
