use std::collections::BTreeMap;

use rand::Rng;

use super::choice::{choose_plan, Offer};
use super::entry::mvno_entry_exit;
use super::ledger::{EpochLedger, LicensedAudit, Party, SliceAudit, TransferKind};
use super::pricing::{apply_pricing, PricePoint};
use super::DynamicsError;
use crate::assign::{
    chaotic_allocate, nested_allocate, virtual_operator_allocate, MvnoLoad, Registration,
};
use crate::fair::{gps_allocate, priority_conserve, FlowSpec};
use crate::market::{AssignmentModel, MarketState, MvnoId, OperatorId, Plan, PricingPolicy};
use crate::metrics::{jain_index, EpochMetrics, MvnoMetrics, OperatorMetrics, QualityStats};

/// Result of one epoch. `state` is the market after the epoch.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub state: MarketState,
    pub metrics: EpochMetrics,
    pub ledger: EpochLedger,
}

/// One society contract: a consumer's claim through one MVNO.
struct Contract {
    consumer: usize,
    mvno: usize,
    demand: f64,
}

/// Advances the market by one epoch.
///
/// Phases: share refresh, licensed-first conservation, allocation, realized
/// quality, synchronous plan choice, pricing, MVNO entry and exit,
/// settlement, metrics. The input state is never modified; on error nothing
/// of the epoch is applied.
pub fn step_epoch<R: Rng + ?Sized>(
    state: &MarketState,
    rng: &mut R,
) -> Result<EpochOutcome, DynamicsError> {
    let mut s = state.clone();
    let epoch = s.epoch;
    let n = s.consumers.len();
    let jitter = s.settings.demand_jitter;
    let demand: Vec<f64> = s
        .consumers
        .iter()
        .map(|c| {
            if jitter > 0.0 {
                c.demand * (1.0 + jitter * rng.gen_range(-1.0..1.0))
            } else {
                c.demand
            }
        })
        .collect();

    let op_index: BTreeMap<OperatorId, usize> = s
        .operators
        .iter()
        .enumerate()
        .map(|(i, o)| (o.id.clone(), i))
        .collect();
    let mvno_index: BTreeMap<MvnoId, usize> = s
        .mvnos
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.clone(), i))
        .collect();
    let mvno_host: Vec<usize> = s.mvnos.iter().map(|m| op_index[&m.host]).collect();

    let mut contracts = Vec::new();
    let mut exclusive_members: Vec<Vec<usize>> = vec![Vec::new(); s.operators.len()];
    for (i, c) in s.consumers.iter().enumerate() {
        if let Plan::Exclusive(op) = &c.plan {
            let o = *op_index
                .get(op)
                .ok_or_else(|| DynamicsError::UnknownProvider(op.to_string()))?;
            exclusive_members[o].push(i);
        }
        let k = c.society_contracts().count();
        for m in c.society_contracts() {
            let idx = *mvno_index
                .get(m)
                .filter(|&&idx| s.mvnos[idx].active)
                .ok_or_else(|| DynamicsError::UnknownProvider(m.to_string()))?;
            contracts.push(Contract {
                consumer: i,
                mvno: idx,
                demand: demand[i] / k as f64,
            });
        }
    }
    let mut mvno_contracts: Vec<Vec<usize>> = vec![Vec::new(); s.mvnos.len()];
    for (k, ct) in contracts.iter().enumerate() {
        mvno_contracts[ct.mvno].push(k);
    }

    // Share table.
    let mut users: BTreeMap<OperatorId, u64> =
        s.operators.iter().map(|o| (o.id.clone(), 0)).collect();
    for ct in &contracts {
        *users.get_mut(&s.operators[mvno_host[ct.mvno]].id).unwrap() += 1;
    }
    if s.settings.assignment.count_exclusive_users {
        for (o, members) in exclusive_members.iter().enumerate() {
            *users.get_mut(&s.operators[o].id).unwrap() += members.len() as u64;
        }
    }
    let society_capacity = s.pool.society_capacity();
    s.share_table.refresh(epoch, society_capacity, &users);

    // Licensed spectrum first, idle remainder donated.
    let society_demand: f64 = contracts.iter().map(|c| c.demand).sum();
    let mut quality = vec![0.0; n];
    let mut donation = vec![0.0; s.operators.len()];
    let mut ledger = EpochLedger {
        epoch,
        ..EpochLedger::default()
    };
    let mut exclusive_demand = vec![0.0; s.operators.len()];
    let mut exclusive_delivered = vec![0.0; s.operators.len()];
    for (o, op) in s.operators.iter().enumerate() {
        let capacity = op.uncommitted_capacity();
        let members = &exclusive_members[o];
        let licensed_demand: f64 = members.iter().map(|&i| demand[i]).sum();
        let cons = priority_conserve(capacity, licensed_demand, society_demand)?;
        let flows: Vec<FlowSpec> = members
            .iter()
            .map(|&i| FlowSpec::new(1.0, demand[i]))
            .collect();
        let alloc = gps_allocate(cons.licensed_allocation, &flows)?;
        for (&i, a) in members.iter().zip(&alloc) {
            quality[i] = *a;
        }
        let delivered: f64 = alloc.iter().sum();
        donation[o] += cons.donated_capacity;
        exclusive_demand[o] = licensed_demand;
        exclusive_delivered[o] = delivered;
        ledger.licensed.push(LicensedAudit {
            operator: op.id.clone(),
            capacity,
            demand: licensed_demand,
            allocation: cons.licensed_allocation,
            donated: cons.donated_capacity,
            delivered,
        });
    }

    // Dedicated slices serve their own contracts; idle slice capacity is donated too.
    let mut from_slice = vec![0.0; contracts.len()];
    for (m, mvno) in s.mvnos.iter().enumerate() {
        if !mvno.active || mvno.purchased_slice <= 0.0 {
            continue;
        }
        let ks = &mvno_contracts[m];
        let flows: Vec<FlowSpec> = ks
            .iter()
            .map(|&k| FlowSpec::new(1.0, contracts[k].demand))
            .collect();
        let alloc = gps_allocate(mvno.purchased_slice, &flows)?;
        for (&k, a) in ks.iter().zip(alloc) {
            from_slice[k] = a;
        }
        let used: f64 = ks.iter().map(|&k| from_slice[k]).sum();
        donation[mvno_host[m]] += (mvno.purchased_slice - used).max(0.0);
    }
    let residual: Vec<f64> = contracts
        .iter()
        .zip(&from_slice)
        .map(|(c, got)| (c.demand - got).max(0.0))
        .collect();

    // Society pool plus donations.
    let donated_total: f64 = donation.iter().sum();
    let society_supply = society_capacity + donated_total;
    let mut from_pool = vec![0.0; contracts.len()];
    let mut spilled = vec![false; n];
    let gamma = s.settings.assignment.continuity_penalty;
    match s.assignment_model {
        AssignmentModel::PerOperator => {
            for (o, op) in s.operators.iter().enumerate() {
                let capacity = s.share_table.share(&op.id) + donation[o];
                let hosted: Vec<usize> = (0..s.mvnos.len())
                    .filter(|&m| mvno_host[m] == o && !mvno_contracts[m].is_empty())
                    .collect();
                let groups: Vec<Vec<f64>> = hosted
                    .iter()
                    .map(|&m| mvno_contracts[m].iter().map(|&k| residual[k]).collect())
                    .collect();
                let alloc = nested_allocate(capacity, &groups)?;
                for (&m, got) in hosted.iter().zip(alloc) {
                    for (&k, a) in mvno_contracts[m].iter().zip(got) {
                        from_pool[k] = a;
                    }
                }
            }
        }
        AssignmentModel::VirtualOperator => {
            let stage = |capacity: f64, want: &[f64]| -> Result<Vec<f64>, DynamicsError> {
                let loads: BTreeMap<MvnoId, MvnoLoad> = (0..s.mvnos.len())
                    .filter(|&m| !mvno_contracts[m].is_empty())
                    .map(|m| {
                        let ks = &mvno_contracts[m];
                        let load = MvnoLoad {
                            users: ks.len() as u64,
                            demand: ks.iter().map(|&k| want[k]).sum(),
                        };
                        (s.mvnos[m].id.clone(), load)
                    })
                    .collect();
                let per_mvno = virtual_operator_allocate(capacity, &loads)?;
                let mut out = vec![0.0; want.len()];
                for (id, cap) in per_mvno {
                    let ks = &mvno_contracts[mvno_index[&id]];
                    let flows: Vec<FlowSpec> =
                        ks.iter().map(|&k| FlowSpec::new(1.0, want[k])).collect();
                    for (&k, a) in ks.iter().zip(gps_allocate(cap, &flows)?) {
                        out[k] = a;
                    }
                }
                Ok(out)
            };
            let base = stage(society_capacity, &residual)?;
            let rest: Vec<f64> = residual
                .iter()
                .zip(&base)
                .map(|(r, b)| (r - b).max(0.0))
                .collect();
            let extra = stage(donated_total, &rest)?;
            for k in 0..contracts.len() {
                from_pool[k] = base[k] + extra[k];
                if extra[k] > 0.0 {
                    spilled[contracts[k].consumer] = true;
                }
            }
        }
        AssignmentModel::Chaotic => {
            from_pool = chaotic_allocate(
                society_supply,
                &residual,
                s.settings.assignment.chaotic_efficiency,
            )?;
        }
    }
    let pool_used: f64 = from_pool.iter().sum();
    let unallocated = (society_supply - pool_used).max(0.0);

    // Realized quality.
    let penalty = |i: usize| if spilled[i] { gamma } else { 1.0 };
    let mut delivered = vec![0.0; contracts.len()];
    for (k, ct) in contracts.iter().enumerate() {
        delivered[k] = (from_slice[k] + from_pool[k]) * penalty(ct.consumer);
        quality[ct.consumer] += delivered[k];
    }
    for (m, mvno) in s.mvnos.iter().enumerate() {
        if mvno.active {
            let ks = &mvno_contracts[m];
            ledger.slices.push(SliceAudit {
                mvno: mvno.id.clone(),
                slice: mvno.purchased_slice,
                from_slice: ks.iter().map(|&k| from_slice[k]).sum(),
                from_society: ks.iter().map(|&k| from_pool[k]).sum(),
            });
        }
    }

    let ratio = |got: f64, want: f64| {
        if want > 0.0 {
            (got / want).min(1.0)
        } else {
            0.0
        }
    };
    let op_fill: Vec<f64> = (0..s.operators.len())
        .map(|o| {
            if exclusive_demand[o] > 0.0 {
                ratio(exclusive_delivered[o], exclusive_demand[o])
            } else if s.operators[o].uncommitted_capacity() > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let fill_of = |ks: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let (mut got, mut want) = (0.0, 0.0);
        for k in ks {
            got += delivered[k];
            want += contracts[k].demand;
        }
        (want > 0.0).then(|| ratio(got, want))
    };
    let global_fill = fill_of(&mut (0..contracts.len()));
    let mvno_fill: Vec<f64> = (0..s.mvnos.len())
        .map(|m| {
            if let Some(f) = fill_of(&mut mvno_contracts[m].iter().copied()) {
                return f;
            }
            let host = mvno_host[m];
            let (segment_fill, reachable) = match s.assignment_model {
                AssignmentModel::PerOperator => (
                    fill_of(
                        &mut (0..contracts.len()).filter(|&k| mvno_host[contracts[k].mvno] == host),
                    ),
                    s.share_table.share(&s.operators[host].id) + donation[host],
                ),
                _ => (global_fill, society_supply),
            };
            segment_fill.unwrap_or(if reachable + s.mvnos[m].purchased_slice > 0.0 {
                1.0
            } else {
                0.0
            })
        })
        .collect();

    // Synchronous plan choice on this epoch's realized quality.
    let quotes: Vec<(MvnoId, f64, f64)> = (0..s.mvnos.len())
        .filter(|&m| s.mvnos[m].active)
        .map(|m| (s.mvnos[m].id.clone(), s.mvnos[m].retail_price, mvno_fill[m]))
        .collect();
    let society_offers = |d: f64, only: &dyn Fn(&MvnoId) -> bool| -> Vec<Offer> {
        quotes
            .iter()
            .filter(|(id, _, _)| only(id))
            .map(|(id, price, fill)| Offer {
                plan: Plan::Society(id.clone()),
                price: *price,
                quality: fill * d,
            })
            .collect()
    };
    // Who reconsiders is drawn in consumer-id order, so it does not depend on list order.
    let rate = s.settings.revision_rate;
    let mut draw = vec![0.0; n];
    if rate < 1.0 {
        let mut by_id: Vec<usize> = (0..n).collect();
        by_id.sort_by_key(|&i| s.consumers[i].id);
        for i in by_id {
            draw[i] = rng.gen::<f64>();
        }
    }
    let mut cached: Option<(f64, Vec<Offer>, Vec<Offer>)> = None;
    let mut new_plans: Vec<Option<Plan>> = Vec::with_capacity(n);
    for (i, c) in s.consumers.iter().enumerate() {
        if rate < 1.0 && draw[i] >= rate {
            new_plans.push(None);
            continue;
        }
        if cached.as_ref().is_none_or(|(d, _, _)| *d != c.demand) {
            let exclusive: Vec<Offer> = s
                .operators
                .iter()
                .enumerate()
                .map(|(o, op)| Offer {
                    plan: Plan::Exclusive(op.id.clone()),
                    price: op.retail_price,
                    quality: op_fill[o] * c.demand,
                })
                .collect();
            cached = Some((c.demand, exclusive, society_offers(c.demand, &|_| true)));
        }
        let (_, exclusive, society) = cached.as_ref().unwrap();
        let plan = choose_plan(c, exclusive, society)?;
        new_plans.push((plan != c.plan).then_some(plan));
    }
    for (c, plan) in s.consumers.iter_mut().zip(new_plans) {
        if let Some(plan) = plan {
            if s.registry.switch(&c.access_code, &c.plan, plan.clone()) == Registration::Accepted {
                c.plan = plan;
            }
        }
    }

    // Settlement at the prices posted for this epoch.
    let op_price: Vec<f64> = s.operators.iter().map(|o| o.retail_price).collect();
    let mvno_price: Vec<f64> = s.mvnos.iter().map(|m| m.retail_price).collect();
    let mut mvno_contract_count = vec![0u64; s.mvnos.len()];
    let mut op_retail = vec![0.0; s.operators.len()];
    let mut op_hosting = vec![0.0; s.operators.len()];
    let mut op_slices = vec![0.0; s.operators.len()];
    let mut mvno_retail = vec![0.0; s.mvnos.len()];
    let mut mvno_spend = vec![0.0; s.mvnos.len()];
    for c in &s.consumers {
        let party = Party::Consumer(c.id);
        match &c.plan {
            Plan::Exclusive(op) => {
                let o = op_index[op];
                op_retail[o] += op_price[o] * c.demand;
                ledger.pay(
                    party.clone(),
                    Party::Operator(op.clone()),
                    TransferKind::Retail,
                    op_price[o] * c.demand,
                );
            }
            Plan::Society(_) => {}
        }
        for m in c.society_contracts() {
            let idx = mvno_index[m];
            mvno_contract_count[idx] += 1;
            mvno_retail[idx] += mvno_price[idx] * c.demand;
            ledger.pay(
                party.clone(),
                Party::Mvno(m.clone()),
                TransferKind::Retail,
                mvno_price[idx] * c.demand,
            );
        }
    }
    for (m, mvno) in s.mvnos.iter().enumerate() {
        if !mvno.active {
            continue;
        }
        let host = Party::Operator(mvno.host.clone());
        let fee = s.operators[mvno_host[m]].hosting_fee * mvno_contract_count[m] as f64;
        if fee > 0.0 {
            op_hosting[mvno_host[m]] += fee;
            mvno_spend[m] += fee;
            ledger.pay(
                Party::Mvno(mvno.id.clone()),
                host.clone(),
                TransferKind::HostingFee,
                fee,
            );
        }
        let slice = mvno.purchased_slice * mvno.slice_unit_price;
        if slice > 0.0 {
            op_slices[mvno_host[m]] += slice;
            mvno_spend[m] += slice;
            ledger.pay(
                Party::Mvno(mvno.id.clone()),
                host,
                TransferKind::SlicePayment,
                slice,
            );
        }
    }

    let mut op_metrics: BTreeMap<OperatorId, OperatorMetrics> = BTreeMap::new();
    for (o, op) in s.operators.iter().enumerate() {
        let (retail, hosting, slices) = (op_retail[o], op_hosting[o], op_slices[o]);
        let revenue = retail + hosting + slices;
        op_metrics.insert(
            op.id.clone(),
            OperatorMetrics {
                price: op_price[o],
                revenue,
                retail_revenue: retail,
                hosting_revenue: hosting,
                slice_revenue: slices,
                profit: revenue - op.infrastructure_cost,
                subs: 0,
            },
        );
    }
    let mut mvno_metrics: BTreeMap<MvnoId, MvnoMetrics> = BTreeMap::new();
    for (m, mvno) in s.mvnos.iter().enumerate() {
        let revenue = mvno_retail[m];
        let costs = if mvno.active {
            mvno_spend[m] + mvno.fixed_cost
        } else {
            0.0
        };
        mvno_metrics.insert(
            mvno.id.clone(),
            MvnoMetrics {
                price: mvno_price[m],
                revenue,
                costs,
                profit: revenue - costs,
                subs: 0,
                active: mvno.active,
            },
        );
    }

    // Pricing for the next epoch.
    for (o, op) in s.operators.iter_mut().enumerate() {
        let mut points: Vec<PricePoint> = s
            .history
            .iter()
            .filter_map(|h| h.operators.get(&op.id))
            .map(|x| PricePoint {
                price: x.price,
                revenue: x.revenue,
                retail: x.retail_revenue,
            })
            .collect();
        points.push(PricePoint {
            price: op_price[o],
            revenue: op_metrics[&op.id].revenue,
            retail: op_metrics[&op.id].retail_revenue,
        });
        update_anchor(
            &op.pricing_policy,
            &mut op.collusion_anchor,
            op_price[o],
            epoch,
        );
        op.retail_price = apply_pricing(
            &op.pricing_policy,
            op_price[o],
            op.collusion_anchor,
            &points,
            epoch,
        );
    }
    for (m, mvno) in s.mvnos.iter_mut().enumerate() {
        if !mvno.active {
            continue;
        }
        let mut points: Vec<PricePoint> = s
            .history
            .iter()
            .filter_map(|h| h.mvnos.get(&mvno.id).filter(|x| x.active))
            .map(|x| PricePoint {
                price: x.price,
                revenue: x.revenue,
                retail: x.revenue,
            })
            .collect();
        points.push(PricePoint {
            price: mvno_price[m],
            revenue: mvno_metrics[&mvno.id].revenue,
            retail: mvno_metrics[&mvno.id].revenue,
        });
        update_anchor(
            &mvno.pricing_policy,
            &mut mvno.collusion_anchor,
            mvno_price[m],
            epoch,
        );
        mvno.retail_price = apply_pricing(
            &mvno.pricing_policy,
            mvno_price[m],
            mvno.collusion_anchor,
            &points,
            epoch,
        )
        .max(0.0);
    }

    // Entry and exit. Customers of a departing MVNO move to the best remaining society offer.
    let thresholds = s.settings.entry_exit.clone();
    let churn = mvno_entry_exit(&mut s, &thresholds, &mvno_metrics);
    if !churn.exited.is_empty() {
        let gone = |id: &MvnoId| churn.exited.contains(id);
        let remaining = |id: &MvnoId| !gone(id);
        let moves: Vec<(usize, Plan)> = s
            .consumers
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(&c.plan, Plan::Society(m) if gone(m)))
            .map(|(i, c)| {
                Ok((
                    i,
                    choose_plan(c, &[], &society_offers(c.demand, &remaining))?,
                ))
            })
            .collect::<Result<_, DynamicsError>>()?;
        for (i, plan) in moves {
            let c = &mut s.consumers[i];
            s.registry.terminate(&c.access_code, &c.plan);
            s.registry.register_contract(&c.access_code, plan.clone());
            c.plan = plan;
        }
        for c in s.consumers.iter_mut() {
            let code = c.access_code.clone();
            let registry = &mut s.registry;
            c.extra_contracts.retain(|m| {
                let keep = !churn.exited.contains(m);
                if !keep {
                    registry.terminate(&code, &Plan::Society(m.clone()));
                }
                keep
            });
        }
    }

    // Metrics.
    let exclusive_q: Vec<f64> = exclusive_members
        .iter()
        .flatten()
        .map(|&i| quality[i])
        .collect();
    let mut society_consumers: Vec<usize> = contracts.iter().map(|c| c.consumer).collect();
    society_consumers.dedup();
    let society_q: Vec<f64> = society_consumers.iter().map(|&i| quality[i]).collect();

    for c in &s.consumers {
        match &c.plan {
            Plan::Exclusive(op) => op_metrics.get_mut(op).unwrap().subs += 1,
            Plan::Society(m) => mvno_metrics.get_mut(m).unwrap().subs += 1,
        }
    }
    let exclusive_subs = op_metrics.values().map(|x| x.subs).sum();
    let society_subs = mvno_metrics.values().map(|x| x.subs).sum();
    let slice_total: f64 = s
        .mvnos
        .iter()
        .zip(&state.mvnos)
        .filter(|(_, before)| before.active)
        .map(|(_, before)| before.purchased_slice)
        .sum();
    let retail_donation: f64 = ledger.licensed.iter().map(|a| a.donated).sum();
    let society_consumer_demand: f64 = society_consumers.iter().map(|&i| demand[i]).sum();
    let retail_capacity: f64 = ledger.licensed.iter().map(|a| a.capacity).sum();
    let exclusive_total: f64 = exclusive_demand.iter().sum();
    let load = |want: f64, have: f64| {
        if have > 0.0 {
            want / have
        } else if want > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };

    let metrics = EpochMetrics {
        epoch,
        operators: op_metrics,
        mvnos: mvno_metrics,
        exclusive_subs,
        society_subs,
        society_quality: QualityStats::from_values(&society_q),
        exclusive_quality: QualityStats::from_values(&exclusive_q),
        jain_society: jain_index(&society_q).unwrap_or(0.0),
        donated: donated_total,
        unallocated,
        society_load: load(
            society_consumer_demand,
            society_capacity + retail_donation + slice_total,
        ),
        exclusive_load: load(exclusive_total, retail_capacity),
        shares: s.share_table.shares.clone(),
    };
    ledger.quality = quality;

    s.history.push_back(metrics.clone());
    while s.history.len() > s.history_limit() {
        s.history.pop_front();
    }
    s.epoch += 1;
    Ok(EpochOutcome {
        state: s,
        metrics,
        ledger,
    })
}

/// Remembers the price in force when a collusion window opens.
fn update_anchor(policy: &PricingPolicy, anchor: &mut Option<f64>, price: f64, epoch: u64) {
    if let PricingPolicy::Collusion {
        start_epoch,
        end_epoch,
        ..
    } = policy
    {
        if (*start_epoch..*end_epoch).contains(&epoch) {
            anchor.get_or_insert(price);
        } else {
            *anchor = None;
        }
    }
}
