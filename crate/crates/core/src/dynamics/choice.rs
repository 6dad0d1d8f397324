use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::market::{Consumer, Plan};

/// A provider's quote to one consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub plan: Plan,
    pub price: f64,
    /// Capacity this consumer can expect per epoch.
    pub quality: f64,
}

/// `α·ln(1 + q/demand) − p`.
pub fn consumer_utility(quality: f64, price: f64, alpha: f64, demand: f64) -> f64 {
    alpha * (quality / demand).ln_1p() - price
}

/// Utility of `offer` net of the switching cost it would trigger.
fn net_utility(consumer: &Consumer, offer: &Offer) -> f64 {
    let u = consumer_utility(offer.quality, offer.price, consumer.alpha, consumer.demand);
    if offer.plan == consumer.plan {
        u
    } else {
        u - consumer.switching_cost
    }
}

fn best<'a>(consumer: &Consumer, offers: &'a [Offer]) -> Option<(f64, &'a Offer)> {
    let mut out: Option<(f64, &Offer)> = None;
    for o in offers {
        let u = net_utility(consumer, o);
        out = match out {
            Some((bu, bo)) if bu > u || (bu == u && bo.plan <= o.plan) => Some((bu, bo)),
            _ => Some((u, o)),
        };
    }
    out
}

/// Picks the consumer's plan for the coming epoch.
///
/// The best exclusive offer wins only if its utility gain over the best
/// society offer is strictly positive once switching costs are charged to
/// every option other than the current plan. Ties go to society, then to the
/// lowest provider id.
pub fn choose_plan(
    consumer: &Consumer,
    exclusive_offers: &[Offer],
    society_offers: &[Offer],
) -> Result<Plan, DynamicsError> {
    let (us, society) = best(consumer, society_offers).ok_or(DynamicsError::NoSocietyOffer)?;
    match best(consumer, exclusive_offers) {
        Some((ue, exclusive)) if ue - us > 0.0 => Ok(exclusive.plan.clone()),
        _ => Ok(society.plan.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{AccessCode, ConsumerId};

    fn consumer(plan: Plan, switching_cost: f64) -> Consumer {
        Consumer {
            id: ConsumerId(0),
            demand: 1.0,
            alpha: 1.0,
            switching_cost,
            plan,
            access_code: AccessCode::from("x"),
            extra_contracts: vec![],
        }
    }

    /// Offer with utility `u` for a consumer with α = 1 and unit demand.
    fn offer(plan: Plan, u: f64) -> Offer {
        Offer {
            plan,
            price: 0.0,
            quality: u.exp_m1(),
        }
    }

    fn exc(id: &str) -> Plan {
        Plan::Exclusive(id.into())
    }

    fn soc(id: &str) -> Plan {
        Plan::Society(id.into())
    }

    #[test]
    fn utility_examples() {
        let e = std::f64::consts::E;
        assert!((consumer_utility(e - 1.0, 1.0, 2.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((consumer_utility(3.0 * (e - 1.0), 1.0, 2.0, 3.0) - 1.0).abs() < 1e-12);
        assert_eq!(consumer_utility(0.0, 0.0, 2.0, 1.0), 0.0);
        assert!(consumer_utility(1.0, 2.0, 1.0, 1.0) < consumer_utility(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn positive_gain_moves_to_exclusive() {
        let c = consumer(soc("m"), 0.0);
        let plan = choose_plan(&c, &[offer(exc("A"), 1.5)], &[offer(soc("m"), 1.0)]).unwrap();
        assert_eq!(plan, exc("A"));
    }

    #[test]
    fn tie_goes_to_society() {
        let c = consumer(soc("m"), 0.0);
        let plan = choose_plan(&c, &[offer(exc("A"), 1.0)], &[offer(soc("m"), 1.0)]).unwrap();
        assert_eq!(plan, soc("m"));
    }

    #[test]
    fn switching_cost_blocks_switch() {
        let c = consumer(soc("m"), 0.7);
        let plan = choose_plan(&c, &[offer(exc("A"), 1.5)], &[offer(soc("m"), 1.0)]).unwrap();
        assert_eq!(plan, soc("m"));
    }

    #[test]
    fn switching_cost_also_keeps_exclusive_customers() {
        let c = consumer(exc("A"), 0.7);
        let plan = choose_plan(&c, &[offer(exc("A"), 1.0)], &[offer(soc("m"), 1.5)]).unwrap();
        assert_eq!(plan, exc("A"));
    }

    #[test]
    fn ties_within_a_segment_go_to_lowest_id() {
        let c = consumer(exc("Z"), 0.0);
        let plan = choose_plan(
            &c,
            &[offer(exc("B"), 2.0), offer(exc("A"), 2.0)],
            &[offer(soc("m2"), 0.5), offer(soc("m1"), 0.5)],
        )
        .unwrap();
        assert_eq!(plan, exc("A"));
        let plan = choose_plan(&c, &[], &[offer(soc("m2"), 0.5), offer(soc("m1"), 0.5)]).unwrap();
        assert_eq!(plan, soc("m1"));
    }

    #[test]
    fn society_offer_required() {
        let c = consumer(soc("m"), 0.0);
        assert!(matches!(
            choose_plan(&c, &[offer(exc("A"), 1.0)], &[]),
            Err(DynamicsError::NoSocietyOffer)
        ));
    }
}
