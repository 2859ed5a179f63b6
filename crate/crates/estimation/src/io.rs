//! CSV inputs.

use std::io::Read;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::Result;
use crate::pipeline::AuctionLogRow;
use crate::slot_effects::CtrPanelRow;

fn read_rows<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// `advertiser,slot,day,impressions,clicks`
pub fn read_panel<R: Read>(reader: R) -> Result<Vec<CtrPanelRow>> {
    read_rows(reader)
}

/// `auction_id,type,slot_count,advertiser,gamma,bid`
pub fn read_auction_log<R: Read>(reader: R) -> Result<Vec<AuctionLogRow>> {
    read_rows(reader)
}

pub fn read_panel_file(path: &Path) -> Result<Vec<CtrPanelRow>> {
    read_panel(std::fs::File::open(path)?)
}

pub fn read_auction_log_file(path: &Path) -> Result<Vec<AuctionLogRow>> {
    read_auction_log(std::fs::File::open(path)?)
}
