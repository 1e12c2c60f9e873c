// Copyright 2026 The gsp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Estimation of a Markov-switching poisoning model from a contaminated
//! series and a clean reference sample.

pub mod contrast;
pub mod decode;
pub mod empirical;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod model;
pub mod optim;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{ThetaParam, VParam, DEFAULT_DELTA};
pub use simulate::Scenario;
